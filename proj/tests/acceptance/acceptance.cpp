// Acceptance checks. Prints one PASS/FAIL line per criterion with the
// measured values; exits non-zero if any criterion fails. Pass criterion
// numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "surnn/error.hpp"
#include "surnn/eval.hpp"
#include "surnn/fixtures.hpp"
#include "surnn/format.hpp"
#include "surnn/rescore.hpp"
#include "surnn/training.hpp"

using namespace surnn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string slf_text(const Lattice& lat) {
  std::ostringstream out;
  write_slf(lat, out);
  return out.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Fixture set, vocabulary and the trained models, built on first use and
// shared between criteria.
class Workbench {
 public:
  const FixtureSet& fixtures() {
    if (!set_) {
      set_ = std::make_unique<FixtureSet>(make_fixtures(FixtureConfig{}));
      vocab_ = Vocabulary::build(set_->train, kAllWords);
      set_->bigram.bind(vocab_);
      train_ = TokenizedCorpus::from_lines(vocab_, set_->train);
      heldout_ = TokenizedCorpus::from_lines(vocab_, set_->heldout);
    }
    return *set_;
  }
  const Vocabulary& vocab() {
    fixtures();
    return vocab_;
  }
  const TokenizedCorpus& train_corpus() {
    fixtures();
    return train_;
  }
  const TokenizedCorpus& heldout() {
    fixtures();
    return heldout_;
  }
  const ArpaModel& bigram() { return fixtures().bigram; }

  const UniRnnlm& uni() {
    if (!uni_) {
      uni_ = std::make_unique<UniRnnlm>(ModelConfig::for_vocab(Arch::kUni, vocab(), 16, 32));
      uni_->init_random(1);
      reports_["uni"] = train_uni(*uni_, train_corpus(), TrainConfig{});
    }
    return *uni_;
  }
  const SuRnnlm& su(int k) {
    auto& m = su_[k];
    if (!m) {
      m = std::make_unique<SuRnnlm>(ModelConfig::for_vocab(Arch::kSu, vocab(), 16, 32, k));
      m->init_random(1);
      reports_["su" + std::to_string(k)] = train_su(*m, train_corpus(), TrainConfig{});
    }
    return *m;
  }
  const BiRnnlm& bi() {
    if (!bi_) {
      bi_ = std::make_unique<BiRnnlm>(ModelConfig::for_vocab(Arch::kBi, vocab(), 16, 32));
      bi_->init_random(1);
      reports_["bi"] = train_bi(*bi_, train_corpus(), TrainConfig{});
    }
    return *bi_;
  }
  const TrainReport& report(const std::string& name) { return reports_.at(name); }

 private:
  std::unique_ptr<FixtureSet> set_;
  Vocabulary vocab_;
  TokenizedCorpus train_, heldout_;
  std::unique_ptr<UniRnnlm> uni_;
  std::map<int, std::unique_ptr<SuRnnlm>> su_;
  std::unique_ptr<BiRnnlm> bi_;
  std::map<std::string, TrainReport> reports_;
};

// ---------------------------------------------------------------------------
// 1: gradients against central differences.

double tensor_rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn));
  return denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
}

// Worst per-tensor relative error of `grad_fn` (which fills a gradient model
// and returns the loss) against central differences of the same loss.
template <typename Model, typename GradFn>
double worst_gradient_error(Model model, GradFn grad_fn, WordId pad_row, std::string& worst_name) {
  Model grad = model.zeros_like();
  grad_fn(model, grad);
  const auto params = model.params();
  const auto grads = grad.params();
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto& p = params[t];
    std::vector<double> analytic, numeric;
    for (Index j = 0; j < p.size(); ++j) {
      if (p.name == "embedding" && j % p.rows == pad_row) continue;
      const double saved = p.data[j];
      Model scratch = model.zeros_like();
      p.data[j] = saved + eps;
      const double up = grad_fn(model, scratch);
      p.data[j] = saved - eps;
      const double down = grad_fn(model, scratch);
      p.data[j] = saved;
      analytic.push_back(grads[t].data[j]);
      numeric.push_back((up - down) / (2 * eps));
    }
    const double e = tensor_rel_error(analytic, numeric);
    if (e > worst) {
      worst = e;
      worst_name = p.name;
    }
  }
  return worst;
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    auto lines = testing::toy_lines(rng, 6, 14);
    std::vector<std::string> vocab_text = lines;
    std::string all;
    for (int w = 0; w < 14; ++w) all += "w" + std::to_string(w) + " ";
    vocab_text.push_back(all);
    const Vocabulary vocab = Vocabulary::build(vocab_text, 10);
    if (vocab.size() != 20) throw Error("gradient check vocabulary is not 20 words");
    const auto corpus = TokenizedCorpus::from_lines(vocab, lines);
    const auto batch = make_spliced_batches(corpus, 2);

    auto check = [&](const std::string& label, double e, const std::string& tensor) {
      if (e > worst) {
        worst = e;
        where = label + "/" + tensor + " seed " + std::to_string(seed);
      }
    };
    {
      UniRnnlm m(ModelConfig::for_vocab(Arch::kUni, vocab, 8, 8));
      m.init_random(seed, 0.5);
      const auto seg = make_segments(batch, 64, 0, vocab.sent_begin(), vocab.sent_end(), vocab.pad()).at(0);
      std::string tensor;
      const double e = worst_gradient_error(m, [&](const UniRnnlm& mm, UniRnnlm& g) {
        Matrix state = Matrix::Zero(8, seg.streams);
        return uni_segment_grad(mm, seg, state, g).loss;
      }, vocab.pad(), tensor);
      check("uni", e, tensor);
    }
    for (int k : {1, 3}) {
      SuRnnlm m(ModelConfig::for_vocab(Arch::kSu, vocab, 8, 8, k));
      m.init_random(seed, 0.5);
      const auto seg = make_segments(batch, 64, k, vocab.sent_begin(), vocab.sent_end(), vocab.pad()).at(0);
      std::string tensor;
      const double e = worst_gradient_error(m, [&](const SuRnnlm& mm, SuRnnlm& g) {
        Matrix state = Matrix::Zero(8, seg.streams);
        return su_segment_grad(mm, seg, state, g).loss;
      }, vocab.pad(), tensor);
      check("su" + std::to_string(k), e, tensor);
    }
    {
      BiRnnlm m(ModelConfig::for_vocab(Arch::kBi, vocab, 8, 8));
      m.init_random(seed, 0.5);
      const auto nb = make_null_aligned_batches(corpus, 3, vocab.null()).at(0);
      std::string tensor;
      const double e = worst_gradient_error(m, [&](const BiRnnlm& mm, BiRnnlm& g) {
        return bi_batch_grad(mm, nb, g).loss;
      }, vocab.pad(), tensor);
      check("bi", e, tensor);
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 30,
          "worst per-tensor relative error " + fmt(worst) + (where.empty() ? "" : " (" + where + ")") +
              " over uni, su k=1, su k=3, bi x 5 seeds; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2: su with k = 0 is the uni model.

Outcome criterion_reduction(Workbench& wb) {
  const auto t0 = Clock::now();
  const Vocabulary& vocab = wb.vocab();
  UniRnnlm uni(ModelConfig::for_vocab(Arch::kUni, vocab, 16, 32));
  uni.init_random(7, 0.3);
  const SuRnnlm su = SuRnnlm::from_uni(uni);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<WordId> pick(0, static_cast<WordId>(vocab.num_regular()) - 1);
  std::size_t mismatched = 0, steps = 0;
  for (int p = 0; p < 100; ++p) {
    std::vector<WordId> s = {vocab.sent_begin()};
    const std::size_t len = 1 + rng() % 12;
    for (std::size_t i = 0; i < len; ++i) s.push_back(pick(rng));
    Vector hu = uni.initial_state(), hs = su.initial_state();
    for (std::size_t t = 1; t < s.size(); ++t) {
      const auto a = uni_step(uni, hu, s[t - 1]);
      const auto b = su_step(su, hs, s[t - 1], future_window(s, t, 0, vocab.pad()));
      ++steps;
      if (a.dist != b.dist || a.state != b.state || a.logits != b.logits) ++mismatched;
      hu = a.state;
      hs = b.state;
    }
  }
  const auto& set = wb.fixtures();
  std::size_t lattices = 0, differing = 0;
  RescoreOptions opts;
  for (std::size_t i = 0; i < 50 && i < set.test.size(); ++i) {
    const auto& lat = set.test[i].lattice;
    const auto a = rescore_lattice_uni(lat, vocab, set.bigram, uni, opts);
    const auto b = rescore_lattice_su(lat, vocab, set.bigram, nullptr, su, opts);
    ++lattices;
    if (slf_text(a.lattice) != slf_text(b.lattice)) ++differing;
  }
  const double secs = seconds_since(t0);
  return {mismatched == 0 && differing == 0 && secs < 10,
          std::to_string(mismatched) + "/" + std::to_string(steps) + " prefix steps differ bitwise, " +
              std::to_string(differing) + "/" + std::to_string(lattices) +
              " rescored lattices differ; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 3: lattice rescoring against exhaustive path rescoring.

Outcome criterion_oracle(Workbench& wb) {
  const Vocabulary& vocab = wb.vocab();
  const UniRnnlm& uni = wb.uni();
  const SuRnnlm& su1 = wb.su(1);
  const SuRnnlm& su2 = wb.su(2);
  const auto t0 = Clock::now();

  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab.num_regular(); i += 7) words.push_back(vocab.word(static_cast<WordId>(i)));
  words.push_back("unseen_word");

  struct Config {
    std::string name;
    LmSet lms;
  };
  const std::vector<Config> configs = {
      {"uni", {&vocab, &wb.bigram(), &uni, nullptr, nullptr}},
      {"su1", {&vocab, &wb.bigram(), nullptr, &su1, nullptr}},
      {"su2", {&vocab, &wb.bigram(), nullptr, &su2, nullptr}},
      {"uni+su1", {&vocab, &wb.bigram(), &uni, &su1, nullptr}},
      {"uni+su2", {&vocab, &wb.bigram(), &uni, &su2, nullptr}},
  };
  std::mt19937_64 rng(2024);
  const Scales scales{1.0, 1.0};
  double worst_exact = 0.0, worst_excess = -1e300;
  std::size_t lattices = 0, paths = 0;
  bool path_counts_ok = true;
  for (int i = 0; i < 60; ++i) {
    const Lattice lat = testing::random_lattice(rng, words, 64);
    ++lattices;
    const auto enumerated = testing::enumerate_paths(lat);
    paths += enumerated.size();
    for (const auto& cfg : configs) {
      RescoreOptions exact;
      exact.ngram_approx = 0;
      exact.scales = scales;
      const auto r = rescore_lattice(lat, cfg.lms, exact);
      std::vector<double> oracle;
      for (const auto& p : enumerated) {
        double ac = 0.0;
        for (auto a : p) ac += lat.arcs[a].acoustic;
        oracle.push_back(scales.acoustic * ac +
                         scales.lm * testing::oracle_sentence_lm(cfg.lms, testing::path_words(lat, p),
                                                                 exact.interp, exact.smoothing));
      }
      std::sort(oracle.begin(), oracle.end());
      const auto got = testing::path_totals(r.lattice, scales);
      if (got.size() != oracle.size()) {
        path_counts_ok = false;
        continue;
      }
      for (std::size_t j = 0; j < got.size(); ++j) {
        worst_exact = std::max(worst_exact, std::abs(got[j] - oracle[j]));
      }
      RescoreOptions approx = exact;
      approx.ngram_approx = 3;
      const double approx_best = best_path(rescore_lattice(lat, cfg.lms, approx).lattice, scales).total;
      worst_excess = std::max(worst_excess, approx_best - oracle.back());
    }
  }
  const double secs = seconds_since(t0);
  return {path_counts_ok && worst_exact <= 1e-6 && worst_excess <= 1e-9 && secs < 120,
          std::to_string(lattices) + " lattices (" + std::to_string(paths) +
              " paths), uni/su1/su2/uni+su1/uni+su2: max |lattice - exhaustive| " + fmt(worst_exact) +
              ", max 3-gram 1-best excess over exact " + fmt(worst_excess) + "; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 4: expansion of the example lattice against brute-force context enumeration.

struct TopologyCount {
  std::size_t nodes = 0;
  std::size_t arcs = 0;
  std::vector<std::size_t> per_node;
};

TopologyCount enumerate_contexts(const Lattice& lat, int n, int k) {
  using Key = std::pair<std::vector<std::string>, std::vector<std::string>>;
  std::vector<std::set<Key>> keys(lat.nodes.size());
  std::set<std::tuple<std::size_t, Key, Key>> arcs;
  const std::size_t fin = lat.final(), init = lat.initial();
  for (const auto& path : testing::enumerate_paths(lat)) {
    // Tokens seen on the path, and the node reached after each arc.
    std::vector<std::string> seq = {"<s>"};
    std::vector<std::size_t> token_count_at = {1};  // tokens consumed when standing at node i of the path
    for (auto a : path) {
      const auto& w = lat.arcs[a].word;
      if (w != kNullWord && w != kSentBeginToken && w != kSentEndToken) seq.push_back(w);
      token_count_at.push_back(seq.size());
    }
    auto key_at = [&](std::size_t step) -> Key {
      const std::size_t node = step == 0 ? init : lat.arcs[path[step - 1]].end;
      if (node == init || node == fin) return {};
      const std::size_t used = token_count_at[step];
      std::vector<std::string> hist(seq.begin() + static_cast<long>(used) -
                                        std::min<long>(static_cast<long>(used), n - 1),
                                    seq.begin() + static_cast<long>(used));
      std::vector<std::string> fut(seq.begin() + static_cast<long>(used), seq.end());
      fut.push_back("</s>");
      fut.resize(static_cast<std::size_t>(k), "<pad>");
      return {hist, fut};
    };
    for (std::size_t step = 0; step <= path.size(); ++step) {
      const std::size_t node = step == 0 ? init : lat.arcs[path[step - 1]].end;
      keys[node].insert(key_at(step));
      if (step > 0) arcs.insert({path[step - 1], key_at(step - 1), key_at(step)});
    }
  }
  TopologyCount c;
  for (const auto& s : keys) {
    c.per_node.push_back(s.size());
    c.nodes += s.size();
  }
  c.arcs = arcs.size();
  return c;
}

Outcome criterion_topology(Workbench& wb) {
  const Vocabulary& vocab = wb.vocab();
  // The example lattice uses words w0..w5; give it a vocabulary of its own.
  std::vector<std::string> text = {"w0 w1 w2 w3 w4 w5"};
  const Vocabulary v = Vocabulary::build(text, kAllWords);
  ArpaModel ng = train_kn(TokenizedCorpus::from_lines(v, text), v, 2);
  ng.bind(v);
  UniRnnlm uni(ModelConfig::for_vocab(Arch::kUni, v, 4, 4));
  uni.init_random(1);
  SuRnnlm su(ModelConfig::for_vocab(Arch::kSu, v, 4, 4, 1));
  su.init_random(2);
  (void)vocab;

  const Lattice lat = example_lattice();
  RescoreOptions opts;
  opts.ngram_approx = 3;
  const auto u = rescore_lattice_uni(lat, v, ng, uni, opts);
  const auto s = rescore_lattice_su(lat, v, ng, &uni, su, opts);
  const auto ou = enumerate_contexts(lat, 3, 0);
  const auto os = enumerate_contexts(lat, 3, 1);

  auto copies = [&](const RescoreResult& r) {
    std::vector<std::size_t> c(lat.nodes.size(), 0);
    for (auto o : r.origin) ++c[o];
    return c;
  };
  const auto cu = copies(u), cs = copies(s);
  auto duplicated = [](const std::vector<std::size_t>& c) {
    std::vector<std::size_t> d;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] > 1) d.push_back(i);
    }
    return d;
  };
  // The merge node (end of w2) is the only node uni rescoring duplicates;
  // su with one succeeding word also splits the node before the w4/w5 branch.
  const bool uni_ok = u.lattice.nodes.size() == ou.nodes && u.lattice.arcs.size() == ou.arcs &&
                      cu == ou.per_node && duplicated(cu) == std::vector<std::size_t>{3};
  const bool su_ok = s.lattice.nodes.size() == os.nodes && s.lattice.arcs.size() == os.arcs &&
                     cs == os.per_node && duplicated(cs) == std::vector<std::size_t>{3, 4};
  return {uni_ok && su_ok,
          "uni 3-gram: " + std::to_string(u.lattice.nodes.size()) + " nodes/" +
              std::to_string(u.lattice.arcs.size()) + " arcs (oracle " + std::to_string(ou.nodes) + "/" +
              std::to_string(ou.arcs) + "), duplicated node 3 only: " + (duplicated(cu) == std::vector<std::size_t>{3} ? "yes" : "no") +
              "; su k=1: " + std::to_string(s.lattice.nodes.size()) + " nodes/" +
              std::to_string(s.lattice.arcs.size()) + " arcs (oracle " + std::to_string(os.nodes) + "/" +
              std::to_string(os.arcs) + "), duplicated nodes 3 and 4: " +
              (duplicated(cs) == std::vector<std::size_t>{3, 4} ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 5: pseudo-perplexity trend over k.

double heldout_value(Workbench& wb, const WordScorer& scorer, bool pseudo) {
  return pseudo ? pseudo_perplexity(scorer, wb.heldout()).value : perplexity(scorer, wb.heldout()).value;
}

Outcome criterion_ppl_trend(Workbench& wb) {
  const auto t0 = Clock::now();
  const auto& uni = wb.uni();
  const double p0 = heldout_value(wb, [&](std::span<const WordId> s) { return uni_word_logprobs(uni, s); }, false);
  std::vector<double> pk;
  for (int k : {1, 2, 3}) {
    const auto& su = wb.su(k);
    pk.push_back(heldout_value(wb, [&](std::span<const WordId> s) { return su_word_logprobs(su, s); }, true));
  }
  const auto& bi = wb.bi();
  const double pb = heldout_value(wb, [&](std::span<const WordId> s) { return bi_word_logprobs(bi, s); }, true);
  const double secs = seconds_since(t0);
  const bool ok = pk[0] < p0 && pk[1] <= pk[0] * 1.02 && pk[2] <= pk[1] * 1.02 && secs < 600;
  return {ok, "held-out PPL k=0 " + fmt(p0) + ", pseudo-PPL k=1 " + fmt(pk[0]) + ", k=2 " + fmt(pk[1]) +
                  ", k=3 " + fmt(pk[2]) + " (bi " + fmt(pb) + "); " + fmt(secs, 3) + " s incl. training"};
}

// ---------------------------------------------------------------------------
// 6: WER ordering on the fixture test set.

double rescored_wer(Workbench& wb, const LmSet& lms) {
  RescoreOptions opts;
  WerResult total;
  for (const auto& u : wb.fixtures().test) {
    const auto r = rescore_lattice(u.lattice, lms, opts);
    total += wer(u.reference, best_path(r.lattice, opts.scales).words);
  }
  return 100.0 * total.rate();
}

Outcome criterion_wer(Workbench& wb) {
  const auto t0 = Clock::now();
  const auto& set = wb.fixtures();
  const Vocabulary& vocab = wb.vocab();
  WerResult base;
  for (const auto& u : set.test) base += wer(u.reference, best_path(u.lattice, {}).words);
  const double w0 = 100.0 * base.rate();
  const double wu = rescored_wer(wb, {&vocab, &set.bigram, &wb.uni(), nullptr, nullptr});
  const double w1 = rescored_wer(wb, {&vocab, &set.bigram, &wb.uni(), &wb.su(1), nullptr});
  const double w3 = rescored_wer(wb, {&vocab, &set.bigram, &wb.uni(), &wb.su(3), nullptr});
  const double secs = seconds_since(t0);
  const bool ok = w0 - wu >= 0.2 && wu - w1 >= 0.2 && w1 - w3 >= 0.2 && secs < 900;
  return {ok, std::to_string(set.test.size()) + " utterances: WER baseline " + fmt(w0) + "%, +uni " +
                  fmt(wu) + "%, +su k=1 " + fmt(w1) + "%, +su k=3 " + fmt(w3) + "%; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 7: smoothing.

Outcome criterion_smoothing() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  std::size_t argmax_changed = 0, not_bitwise = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vector l(static_cast<Index>(2 + rng() % 50));
    for (Index j = 0; j < l.size(); ++j) l(j) = g(rng);
    Index a, b;
    l.maxCoeff(&a);
    const Vector s = smooth(l, {0.7});
    s.maxCoeff(&b);
    argmax_changed += a != b;
    if (smooth(l, {1.0}) != softmax(l)) ++not_bitwise;
    worst_sum = std::max({worst_sum, std::abs(s.sum() - 1.0), std::abs(smooth(l, {1.0}).sum() - 1.0)});
  }
  return {argmax_changed == 0 && not_bitwise == 0 && worst_sum <= 1e-9,
          "1000 logit vectors: argmax changed " + std::to_string(argmax_changed) + ", alpha=1 differs from softmax " +
              std::to_string(not_bitwise) + ", max |sum - 1| " + fmt(worst_sum)};
}

// ---------------------------------------------------------------------------
// 8: interpolation endpoints and invariance to rescaling the future model.

Outcome criterion_interpolation(Workbench& wb) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  std::size_t endpoint_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const double pn = u(rng), pu = u(rng), pf = u(rng);
    if (linear(pn, pu, 0.0) != pn || linear(pn, pu, 1.0) != pu) ++endpoint_fail;
    if (loglinear_score(pu, pf, 0.0) != std::log(pu) || loglinear_score(pu, pf, 1.0) != std::log(pf)) {
      ++endpoint_fail;
    }
    if (two_stage(pn, pu, pf, {0.0, 0.0}) != std::log(pn) || two_stage(pn, pu, pf, {1.0, 0.0}) != std::log(pu) ||
        two_stage(pn, pu, pf, {0.3, 1.0}) != std::log(pf)) {
      ++endpoint_fail;
    }
  }

  const auto& set = wb.fixtures();
  const Vocabulary& vocab = wb.vocab();
  UniRnnlm uni(ModelConfig::for_vocab(Arch::kUni, vocab, 16, 32));
  uni.init_random(3, 0.3);
  SuRnnlm su(ModelConfig::for_vocab(Arch::kSu, vocab, 16, 32, 1));
  su.init_random(4, 0.3);
  const LmSet lms{&vocab, &set.bigram, &uni, &su, nullptr};
  const ComponentScorer base = make_component_scorer(lms, {0.7});
  const InterpConfig interp{0.75, 0.3};
  std::size_t lists = 0, rank_changes = 0;
  for (double c : {0.05, 7.5}) {
    // Every word's future probability scaled by c (equal-length hypotheses),
    // and the sentence-level version: only the first word scaled.
    const ComponentScorer per_word = [&, c](std::span<const std::string> w) {
      auto comps = base(w);
      for (auto& x : comps) *x.future *= c;
      return comps;
    };
    const ComponentScorer per_sentence = [&, c](std::span<const std::string> w) {
      auto comps = base(w);
      *comps.front().future *= c;
      return comps;
    };
    for (std::size_t i = 0; i < 40; ++i) {
      const auto list = nbest(set.test[i].lattice, 30, {});
      const auto ref = rescore_nbest(list, base, interp, {});
      for (const auto* scorer : {&per_word, &per_sentence}) {
        const auto out = rescore_nbest(list, *scorer, interp, {});
        ++lists;
        for (std::size_t j = 0; j < out.size(); ++j) {
          if (out[j].words == ref[j].words) continue;
          // Only a reordering of exact ties is acceptable.
          double t_other = 0.0;
          for (const auto& h : ref) {
            if (h.words == out[j].words) t_other = h.total;
          }
          if (std::abs(t_other - ref[j].total) > 1e-9) ++rank_changes;
        }
      }
    }
  }
  return {endpoint_fail == 0 && rank_changes == 0,
          "endpoint violations " + std::to_string(endpoint_fail) + "/3000; ranking changes under rescaled "
          "future probabilities " + std::to_string(rank_changes) + " over " + std::to_string(lists) + " N-best lists"};
}

// ---------------------------------------------------------------------------
// 9: file format round trips and located errors.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion_formats(Workbench& wb) {
  const auto dir = fs::temp_directory_path() / ("surnn_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto& set = wb.fixtures();
  std::size_t arpa_files = 0, arpa_bad = 0, slf_files = 0, slf_bad = 0;
  auto arpa_trip = [&](const ArpaModel& m) {
    save_arpa(m, dir / "a.arpa");
    save_arpa(load_arpa(dir / "a.arpa"), dir / "b.arpa");
    ++arpa_files;
    if (slurp(dir / "a.arpa") != slurp(dir / "b.arpa")) ++arpa_bad;
  };
  arpa_trip(set.bigram);
  arpa_trip(train_kn(wb.train_corpus(), wb.vocab(), 3));
  arpa_trip(train_kn(wb.train_corpus(), wb.vocab(), 1));
  for (const auto* part : {&set.dev, &set.test}) {
    for (const auto& u : *part) {
      save_slf(u.lattice, dir / "a.slf");
      save_slf(load_slf(dir / "a.slf"), dir / "b.slf");
      ++slf_files;
      if (slurp(dir / "a.slf") != slurp(dir / "b.slf")) ++slf_bad;
    }
  }

  struct Bad {
    const char* name;
    const char* text;
  };
  const std::vector<Bad> bad_arpa = {
      {"count.arpa", "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.3\ta\n-0.3\t</s>\n\n\\end\\\n"},
      {"number.arpa", "\\data\\\nngram 1=1\n\n\\1-grams:\nabc\ta\n\n\\end\\\n"},
      {"section.arpa", "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.3\ta\n\n\\3-grams:\n-1\ta a\n\\end\\\n"},
      {"end.arpa", "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n"},
  };
  const std::vector<Bad> bad_slf = {
      {"node.slf", "N=2 L=1\nI=0 t=0\nI=1 t=1\nJ=0 S=0 E=5 W=a\n"},
      {"field.slf", "N=2 L=1\nI=0 t=0\nI=1 t=1\nJ=0 S=0 E=1 W=a a=xyz\n"},
      {"cycle.slf", "N=2 L=2\nI=0 t=0\nI=1 t=0\nJ=0 S=0 E=1 W=a\nJ=1 S=1 E=0 W=b\n"},
      {"missing.slf", "N=3 L=1\nI=0 t=0\nI=1 t=1\nJ=0 S=0 E=1 W=a\n"},
  };
  std::size_t located = 0, total_bad = 0;
  std::string unlocated;
  auto expect_located = [&](const Bad& b, auto loader) {
    const auto p = dir / b.name;
    std::ofstream(p) << b.text;
    ++total_bad;
    try {
      loader(p);
      unlocated += std::string(" ") + b.name + "(accepted)";
    } catch (const FormatError& e) {
      if (e.location().rfind(p.string(), 0) == 0) {
        ++located;
      } else {
        unlocated += std::string(" ") + b.name;
      }
    }
  };
  for (const auto& b : bad_arpa) expect_located(b, [](const fs::path& p) { return load_arpa(p); });
  for (const auto& b : bad_slf) expect_located(b, [](const fs::path& p) { return load_slf(p); });
  fs::remove_all(dir);
  return {arpa_bad == 0 && slf_bad == 0 && located == total_bad,
          "ARPA " + std::to_string(arpa_files - arpa_bad) + "/" + std::to_string(arpa_files) + " and SLF " +
              std::to_string(slf_files - slf_bad) + "/" + std::to_string(slf_files) +
              " byte-identical after save-load-save; malformed inputs with located errors " +
              std::to_string(located) + "/" + std::to_string(total_bad) + unlocated};
}

// ---------------------------------------------------------------------------
// 10: the full-history cache is exact and saves time.

Outcome criterion_cache(Workbench& wb) {
  const auto& set = wb.fixtures();
  const Vocabulary& vocab = wb.vocab();
  const LmSet lms{&vocab, &set.bigram, &wb.uni(), &wb.su(1), nullptr};
  const std::size_t count = std::min<std::size_t>(200, set.test.size());
  auto run = [&](bool cache, std::vector<std::string>* texts) {
    RescoreOptions opts;
    opts.use_cache = cache;
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < count; ++i) {
      const auto r = rescore_lattice(set.test[i].lattice, lms, opts);
      if (texts) texts->push_back(slf_text(r.lattice));
    }
    return seconds_since(t0);
  };
  std::vector<std::string> on, off;
  run(true, &on);
  run(false, &off);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < count; ++i) differing += on[i] != off[i];
  double t_on = 1e300, t_off = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    t_on = std::min(t_on, run(true, nullptr));
    t_off = std::min(t_off, run(false, nullptr));
  }
  return {differing == 0 && t_on < t_off,
          std::to_string(count) + " lattices, uni + su k=1: " + std::to_string(differing) +
              " outputs differ; best of 3 runs cache on " + fmt(t_on, 3) + " s, off " + fmt(t_off, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 11: relative training throughput.

Outcome criterion_throughput(Workbench& wb) {
  wb.uni();
  wb.su(1);
  wb.su(3);
  wb.bi();
  const double u = wb.report("uni").words_per_second();
  const double s1 = wb.report("su1").words_per_second();
  const double s3 = wb.report("su3").words_per_second();
  const double b = wb.report("bi").words_per_second();
  const bool ok = std::abs(s1 / u - 1.0) <= 0.25 && u >= 3 * b && s1 >= 3 * b;
  return {ok, "words/s uni " + fmt(u, 5) + ", su k=1 " + fmt(s1, 5) + " (su/uni " + fmt(s1 / u, 3) +
                  "), su k=3 " + fmt(s3, 5) + ", bi " + fmt(b, 5) + " (uni/bi " + fmt(u / b, 3) +
                  ", su/bi " + fmt(s1 / b, 3) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  Workbench wb;
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "gradient correctness", [] { return criterion_gradients(); }},
      {2, "k=0 reduction to uni", [&] { return criterion_reduction(wb); }},
      {3, "lattice rescoring vs exhaustive paths", [&] { return criterion_oracle(wb); }},
      {4, "example lattice expansion topology", [&] { return criterion_topology(wb); }},
      {5, "pseudo-perplexity trend over k", [&] { return criterion_ppl_trend(wb); }},
      {6, "WER ordering on the fixture set", [&] { return criterion_wer(wb); }},
      {7, "smoothing", [] { return criterion_smoothing(); }},
      {8, "interpolation laws", [&] { return criterion_interpolation(wb); }},
      {9, "format round trips", [&] { return criterion_formats(wb); }},
      {10, "cache exactness and speed", [&] { return criterion_cache(wb); }},
      {11, "relative training throughput", [&] { return criterion_throughput(wb); }},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
