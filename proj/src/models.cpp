#include "surnn/models.hpp"

#include <cmath>

#include "surnn/error.hpp"

namespace surnn {

namespace {

Vector embed(const Matrix& table, WordId id) {
  if (id < 0 || id >= table.rows()) {
    throw UsageError("word id " + std::to_string(id) + " out of range for embedding table");
  }
  return table.row(id).transpose();
}

Vector concat(const Vector& a, const Vector& b) {
  Vector c(a.size() + b.size());
  c << a, b;
  return c;
}

StepResult finish_step(const OutputLayer& out, Vector state, const Vector& context) {
  StepResult r;
  r.logits = out.logits(context);
  r.dist = softmax(r.logits);
  r.state = std::move(state);
  return r;
}

double row_logprob(const OutputMap& map, const Vector& logits, WordId target,
                   SmoothingConfig smoothing) {
  const Vector lp = row_logprobs(logits, smoothing);
  return map.word_logprob(lp(static_cast<Index>(map.row(target))), target);
}

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kUni: return "uni";
    case Arch::kBi: return "bi";
    case Arch::kSu: return "su";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  if (name == "uni") return Arch::kUni;
  if (name == "bi") return Arch::kBi;
  if (name == "su") return Arch::kSu;
  throw UsageError("unknown architecture '" + std::string(name) + "' (expected uni, bi or su)");
}

ModelConfig ModelConfig::for_vocab(Arch arch, const Vocabulary& vocab, Index embed, Index hidden,
                                   int succ, Index future_hidden) {
  ModelConfig c;
  c.arch = arch;
  c.vocab_size = vocab.size();
  c.shortlist = vocab.shortlist_size();
  c.embed = embed;
  c.hidden = hidden;
  if (arch == Arch::kSu) {
    c.succ = succ;
    c.future_hidden = succ == 0 ? 0 : (future_hidden < 0 ? hidden : future_hidden);
  }
  c.validate();
  return c;
}

Index ModelConfig::context_size() const {
  switch (arch) {
    case Arch::kUni: return hidden;
    case Arch::kBi: return 2 * hidden;
    case Arch::kSu: return hidden + future_hidden;
  }
  return hidden;
}

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials)) {
    throw UsageError("model vocabulary must contain regular words");
  }
  if (shortlist > vocab_size - kNumSpecials) throw UsageError("shortlist exceeds vocabulary");
  if (embed <= 0 || hidden <= 0) throw UsageError("embed and hidden sizes must be positive");
  if (succ < 0) throw UsageError("number of succeeding words must be non-negative");
  if (arch != Arch::kSu && (succ != 0 || future_hidden != 0)) {
    throw UsageError("succeeding words are only defined for su models");
  }
  if (arch == Arch::kSu && (succ == 0) != (future_hidden == 0)) {
    throw UsageError("future unit width must be zero exactly when k = 0");
  }
}

UniRnnlm::UniRnnlm(const ModelConfig& cfg)
    : config(cfg),
      embedding(Matrix::Zero(static_cast<Index>(cfg.vocab_size), cfg.embed)),
      gru(cfg.embed, cfg.hidden),
      output(cfg.output_size(), cfg.context_size()) {
  config.validate();
}

ParamList UniRnnlm::params() {
  ParamList p;
  p.push_back(param_ref("embedding", embedding));
  gru.collect("gru", p);
  output.collect("output", p);
  return p;
}

void UniRnnlm::init_random(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  init_uniform(params(), rng, scale);
  embedding.row(config.pad_id()).setZero();
}

BiRnnlm::BiRnnlm(const ModelConfig& cfg)
    : config(cfg),
      embedding(Matrix::Zero(static_cast<Index>(cfg.vocab_size), cfg.embed)),
      forward(cfg.embed, cfg.hidden),
      backward(cfg.embed, cfg.hidden),
      output(cfg.output_size(), cfg.context_size()) {
  config.validate();
}

ParamList BiRnnlm::params() {
  ParamList p;
  p.push_back(param_ref("embedding", embedding));
  forward.collect("forward", p);
  backward.collect("backward", p);
  output.collect("output", p);
  return p;
}

void BiRnnlm::init_random(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  init_uniform(params(), rng, scale);
  embedding.row(config.pad_id()).setZero();
}

SuRnnlm::SuRnnlm(const ModelConfig& cfg)
    : config(cfg),
      embedding(Matrix::Zero(static_cast<Index>(cfg.vocab_size), cfg.embed)),
      gru(cfg.embed, cfg.hidden),
      future(cfg.future_hidden, cfg.succ * cfg.embed),
      output(cfg.output_size(), cfg.context_size()) {
  config.validate();
}

SuRnnlm SuRnnlm::from_uni(const UniRnnlm& uni) {
  ModelConfig cfg = uni.config;
  cfg.arch = Arch::kSu;
  cfg.succ = 0;
  cfg.future_hidden = 0;
  SuRnnlm su(cfg);
  su.embedding = uni.embedding;
  su.gru = uni.gru;
  su.output = uni.output;
  return su;
}

ParamList SuRnnlm::params() {
  ParamList p;
  p.push_back(param_ref("embedding", embedding));
  gru.collect("gru", p);
  if (config.succ > 0) future.collect("future", p);
  output.collect("output", p);
  return p;
}

void SuRnnlm::init_random(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  init_uniform(params(), rng, scale);
  embedding.row(config.pad_id()).setZero();
}

Vector SuRnnlm::future_vector(std::span<const WordId> window) const {
  if (window.size() != static_cast<std::size_t>(config.succ)) {
    throw UsageError("future window has " + std::to_string(window.size()) +
                     " slots, model expects " + std::to_string(config.succ));
  }
  if (config.succ == 0) return Vector();
  Vector x(config.succ * config.embed);
  for (std::size_t j = 0; j < window.size(); ++j) {
    x.segment(static_cast<Index>(j) * config.embed, config.embed) = embed(embedding, window[j]);
  }
  return future.apply(x);
}

Vector uni_advance(const UniRnnlm& model, const Vector& state, WordId prev_word) {
  return gru_step(model.gru, embed(model.embedding, prev_word), state);
}

Vector uni_logits(const UniRnnlm& model, const Vector& next_state) {
  return model.output.logits(next_state);
}

StepResult uni_step(const UniRnnlm& model, const Vector& state, WordId prev_word) {
  Vector next = uni_advance(model, state, prev_word);
  const Vector& context = next;
  return finish_step(model.output, next, context);
}

std::vector<double> uni_word_logprobs(const UniRnnlm& model, std::span<const WordId> sentence,
                                      SmoothingConfig smoothing) {
  const auto map = model.config.output_map();
  std::vector<double> out;
  Vector state = model.initial_state();
  for (std::size_t t = 1; t < sentence.size(); ++t) {
    auto step = uni_step(model, state, sentence[t - 1]);
    out.push_back(row_logprob(map, step.logits, sentence[t], smoothing));
    state = std::move(step.state);
  }
  return out;
}

double uni_sentence_logprob(const UniRnnlm& model, std::span<const WordId> sentence) {
  double total = 0.0;
  for (double lp : uni_word_logprobs(model, sentence)) total += lp;
  return total;
}

std::vector<Vector> bi_sentence_logits(const BiRnnlm& model, std::span<const WordId> sentence) {
  const std::size_t n = sentence.size();
  const Index hidden = model.config.hidden;
  // fwd[t]: state after consuming sentence[0..t]; bwd[t]: after sentence[t..n-1].
  std::vector<Vector> fwd(n), bwd(n + 1);
  Vector h = Vector::Zero(hidden);
  for (std::size_t t = 0; t < n; ++t) {
    h = gru_step(model.forward, embed(model.embedding, sentence[t]), h);
    fwd[t] = h;
  }
  bwd[n] = Vector::Zero(hidden);
  for (std::size_t t = n; t-- > 0;) {
    bwd[t] = gru_step(model.backward, embed(model.embedding, sentence[t]), bwd[t + 1]);
  }
  std::vector<Vector> logits;
  logits.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t t = 1; t < n; ++t) {
    logits.push_back(model.output.logits(concat(fwd[t - 1], bwd[t + 1])));
  }
  return logits;
}

std::vector<Vector> bi_sentence_dists(const BiRnnlm& model, std::span<const WordId> sentence) {
  auto logits = bi_sentence_logits(model, sentence);
  for (auto& l : logits) l = softmax(l);
  return logits;
}

std::vector<double> bi_word_logprobs(const BiRnnlm& model, std::span<const WordId> sentence,
                                     SmoothingConfig smoothing) {
  const auto map = model.config.output_map();
  const auto logits = bi_sentence_logits(model, sentence);
  std::vector<double> out;
  out.reserve(logits.size());
  for (std::size_t t = 1; t < sentence.size(); ++t) {
    out.push_back(row_logprob(map, logits[t - 1], sentence[t], smoothing));
  }
  return out;
}

Vector su_advance(const SuRnnlm& model, const Vector& state, WordId prev_word) {
  return gru_step(model.gru, embed(model.embedding, prev_word), state);
}

Vector su_logits(const SuRnnlm& model, const Vector& next_state, std::span<const WordId> future) {
  if (future.size() != static_cast<std::size_t>(model.config.succ)) {
    throw UsageError("su_logits: future window has " + std::to_string(future.size()) +
                     " slots, model expects k = " + std::to_string(model.config.succ));
  }
  if (model.config.succ == 0) return model.output.logits(next_state);
  return model.output.logits(concat(next_state, model.future_vector(future)));
}

StepResult su_step(const SuRnnlm& model, const Vector& state, WordId prev_word,
                   const FutureWindow& future) {
  if (future.ids.size() != static_cast<std::size_t>(model.config.succ)) {
    throw UsageError("su_step: future window has " + std::to_string(future.ids.size()) +
                     " slots, model expects k = " + std::to_string(model.config.succ));
  }
  Vector next = su_advance(model, state, prev_word);
  if (model.config.succ == 0) {
    const Vector& context = next;
    return finish_step(model.output, next, context);
  }
  const Vector context = concat(next, model.future_vector(future.ids));
  return finish_step(model.output, std::move(next), context);
}

std::vector<double> su_word_logprobs(const SuRnnlm& model, std::span<const WordId> sentence,
                                     SmoothingConfig smoothing) {
  const auto map = model.config.output_map();
  const auto k = static_cast<std::size_t>(model.config.succ);
  std::vector<double> out;
  Vector state = model.initial_state();
  for (std::size_t t = 1; t < sentence.size(); ++t) {
    auto step = su_step(model, state, sentence[t - 1],
                        future_window(sentence, t, k, model.config.pad_id()));
    out.push_back(row_logprob(map, step.logits, sentence[t], smoothing));
    state = std::move(step.state);
  }
  return out;
}

Vector row_logprobs(const Vector& logits, SmoothingConfig smoothing) {
  return smoothing.alpha == 1.0 ? log_softmax(logits) : log_softmax(smoothing.alpha * logits);
}

Vector smooth(const Vector& logits, SmoothingConfig cfg) {
  if (!(cfg.alpha > 0.0)) {
    throw UsageError("smoothing factor must be positive, got " + std::to_string(cfg.alpha));
  }
  if (cfg.alpha == 1.0) return softmax(logits);
  return softmax(cfg.alpha * logits);
}

}  // namespace surnn
