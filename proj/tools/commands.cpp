#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "staged.hpp"
#include "surnn/corpus.hpp"
#include "surnn/error.hpp"
#include "surnn/eval.hpp"
#include "surnn/fixtures.hpp"
#include "surnn/format.hpp"
#include "surnn/interpolate.hpp"
#include "surnn/lattice.hpp"
#include "surnn/model_io.hpp"
#include "surnn/ngram.hpp"
#include "surnn/rescore.hpp"
#include "surnn/training.hpp"

namespace surnn::cli {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure in
// index order is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<fs::path> list_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory", dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no " + ext + " files found", dir);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

std::map<std::string, std::vector<std::string>> load_refs(const std::string& path) {
  std::map<std::string, std::vector<std::string>> refs;
  for (auto& [id, words] : read_references(path)) {
    if (!refs.emplace(id, std::move(words)).second) {
      throw FormatError("duplicate reference id '" + id + "'", path);
    }
  }
  return refs;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

void check_scales(const ScaleOptions& s) {
  require(std::isfinite(s.acoustic) && std::isfinite(s.lm), "scales must be finite");
}

Scales to_scales(const ScaleOptions& s) { return {s.acoustic, s.lm}; }

// Loaded models plus the vocabulary they share. The vocabulary shortlist is
// taken from the recurrent models.
struct LoadedLms {
  Vocabulary vocab;
  std::optional<ArpaModel> ngram;
  std::optional<UniRnnlm> uni;
  std::optional<SuRnnlm> su;
  std::optional<BiRnnlm> bi;

  LmSet set() const {
    LmSet s;
    s.vocab = &vocab;
    s.ngram = ngram ? &*ngram : nullptr;
    s.uni = uni ? &*uni : nullptr;
    s.su = su ? &*su : nullptr;
    s.bi = bi ? &*bi : nullptr;
    return s;
  }
  bool has_future() const { return su || bi; }
};

LoadedLms load_lms(const LmOptions& o, bool need_ngram) {
  require(!o.vocab.empty(), "--vocab is required");
  require(!need_ngram || !o.ngram.empty(), "--ngram is required");
  InterpConfig{o.lambda1, o.lambda2}.validate();
  require(o.alpha > 0.0 && o.alpha <= 1.0, "--alpha must be in (0, 1]");
  LoadedLms l;
  l.vocab = Vocabulary::load(o.vocab);
  std::optional<std::size_t> shortlist;
  auto take_shortlist = [&](const ModelConfig& c, const std::string& path) {
    if (c.vocab_size != l.vocab.size()) {
      throw UsageError("model " + path + " was trained with a different vocabulary");
    }
    if (shortlist && *shortlist != c.shortlist) {
      throw UsageError("models disagree on the output shortlist size");
    }
    shortlist = c.shortlist;
  };
  if (!o.uni.empty()) {
    auto m = load_model(o.uni);
    auto* u = std::get_if<UniRnnlm>(&m);
    require(u != nullptr, "--uni expects a uni model, got " +
                              std::string(arch_name(model_config(m).arch)));
    take_shortlist(u->config, o.uni);
    l.uni = std::move(*u);
  }
  if (!o.model.empty()) {
    auto m = load_model(o.model);
    if (auto* s = std::get_if<SuRnnlm>(&m)) {
      take_shortlist(s->config, o.model);
      l.su = std::move(*s);
    } else if (auto* b = std::get_if<BiRnnlm>(&m)) {
      take_shortlist(b->config, o.model);
      l.bi = std::move(*b);
    } else {
      throw UsageError("--model expects a su or bi model; pass uni models with --uni");
    }
  }
  if (shortlist) l.vocab.set_shortlist_size(*shortlist);
  if (!o.ngram.empty()) {
    l.ngram = load_arpa(o.ngram);
    l.ngram->bind(l.vocab);
  }
  return l;
}

void write_text_report(StagedOutputs& out, const std::string& path, const std::string& text) {
  if (!path.empty()) out.open(path) << text;
}

std::string wer_summary(const WerResult& w) {
  std::ostringstream s;
  s << "ref_words: " << w.ref_length << '\n'
    << "substitutions: " << w.substitutions << '\n'
    << "deletions: " << w.deletions << '\n'
    << "insertions: " << w.insertions << '\n'
    << "wer: " << format_double(100.0 * w.rate()) << '\n';
  return s.str();
}

// Drops the epsilon tokens lattices carry on non-word arcs.
std::vector<std::string> words_only(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (w != kNullWord && w != kSentBeginToken && w != kSentEndToken) out.push_back(w);
  }
  return out;
}

// Shared tail of viterbi and rescore: 1-best transcripts and WER.
std::string score_transcripts(const std::vector<std::string>& ids,
                              const std::vector<std::vector<std::string>>& hyps,
                              const std::string& refs_path, StagedOutputs& out,
                              const std::string& hyp_path) {
  std::string hyp_text;
  for (std::size_t i = 0; i < ids.size(); ++i) hyp_text += ids[i] + ' ' + join(hyps[i]) + '\n';
  write_text_report(out, hyp_path, hyp_text);
  std::ostringstream summary;
  summary << "utterances: " << ids.size() << '\n';
  if (!refs_path.empty()) {
    const auto refs = load_refs(refs_path);
    WerResult total;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = refs.find(ids[i]);
      if (it == refs.end()) throw FormatError("no reference for '" + ids[i] + "'", refs_path);
      total += wer(it->second, hyps[i]);
    }
    summary << wer_summary(total);
  }
  return summary.str();
}

}  // namespace

int cmd_fixtures(const CommonOptions& c, const FixturesOptions& o) {
  require(!o.out.empty(), "--out is required");
  FixtureConfig cfg;
  cfg.seed = c.seed;
  cfg.train_tokens = o.train_tokens;
  cfg.heldout_sentences = o.heldout;
  cfg.dev_utterances = o.dev;
  cfg.test_utterances = o.test;
  cfg.acoustic_noise = o.acoustic_noise;
  cfg.acoustic_bonus = o.acoustic_bonus;
  cfg.max_alternatives = o.max_alternatives;
  const FixtureSet set = make_fixtures(cfg);

  // Generate into a scratch directory next to the target, then move the
  // files over.
  const fs::path out = o.out;
  fs::path scratch = out;
  scratch += ".partial";
  fs::remove_all(scratch);
  StagedOutputs staged;
  try {
    write_fixtures(set, scratch);
    Vocabulary::build(set.train, kAllWords).save(scratch / "vocab.txt");
    for (const auto& e : fs::recursive_directory_iterator(scratch)) {
      if (!e.is_regular_file()) continue;
      std::ifstream in(e.path(), std::ios::binary);
      staged.open(out / fs::relative(e.path(), scratch)) << in.rdbuf();
    }
    staged.commit();
  } catch (...) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
    throw;
  }
  fs::remove_all(scratch);
  std::cout << "train sentences: " << set.train.size() << '\n'
            << "dev utterances: " << set.dev.size() << '\n'
            << "test utterances: " << set.test.size() << '\n';
  return 0;
}

int cmd_vocab(const CommonOptions&, const VocabOptions& o) {
  require(!o.corpus.empty() && !o.out.empty(), "--corpus and --out are required");
  const auto lines = read_lines(o.corpus);
  const auto vocab = Vocabulary::build(lines, kAllWords);
  StagedOutputs out;
  vocab.write(out.open(o.out));
  out.commit();
  std::cout << "words: " << vocab.num_regular() << '\n';
  return 0;
}

int cmd_train(const CommonOptions& c, const TrainOptions& o) {
  require(!o.corpus.empty() && !o.vocab.empty() && !o.out.empty(),
          "--corpus, --vocab and --out are required");
  require(o.arch == "uni" || o.arch == "bi" || o.arch == "su" || o.arch == "ngram",
          "--arch must be one of uni, bi, su, ngram");
  require(o.epochs >= 1, "--epochs must be at least 1");
  require(o.lr > 0.0, "--lr must be positive");
  Vocabulary vocab = Vocabulary::load(o.vocab);
  if (o.shortlist) vocab.set_shortlist_size(*o.shortlist);
  const auto corpus = TokenizedCorpus::from_lines(vocab, read_lines(o.corpus));

  StagedOutputs out;
  std::ostringstream report;
  report << "arch: " << o.arch << '\n';
  if (o.arch == "ngram") {
    const ArpaModel m = train_kn(corpus, vocab, o.order, o.discount);
    write_arpa(m, out.open(o.out));
    report << "order: " << o.order << '\n';
  } else {
    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.lr = o.lr;
    tc.lr_decay = o.lr_decay;
    tc.clip = o.clip;
    tc.streams = o.streams;
    tc.bptt = o.bptt;
    tc.on_epoch = [](const EpochStats& e) {
      std::cerr << "epoch " << e.epoch << " loss " << format_double(e.mean_loss) << " lr "
                << format_double(e.lr) << " words/s "
                << static_cast<long long>(e.seconds > 0 ? e.words / e.seconds : 0) << '\n';
    };
    const Arch arch = parse_arch(o.arch);
    const int succ = arch == Arch::kSu ? o.succ : 0;
    const ModelConfig cfg =
        ModelConfig::for_vocab(arch, vocab, o.embed, o.hidden, succ, o.future_hidden);
    TrainReport r;
    AnyModel model;
    if (arch == Arch::kUni) {
      UniRnnlm m(cfg);
      m.init_random(c.seed);
      r = train_uni(m, corpus, tc);
      model = std::move(m);
    } else if (arch == Arch::kSu) {
      SuRnnlm m(cfg);
      m.init_random(c.seed);
      r = train_su(m, corpus, tc);
      model = std::move(m);
    } else {
      BiRnnlm m(cfg);
      m.init_random(c.seed);
      r = train_bi(m, corpus, tc);
      model = std::move(m);
    }
    write_model(model, out.open(o.out));
    report << "epochs: " << r.epochs.size() << '\n'
           << "words: " << r.words << '\n'
           << "seconds: " << format_double(r.seconds) << '\n'
           << "words_per_second: " << format_double(r.words_per_second()) << '\n'
           << "final_loss: " << format_double(r.final_loss()) << '\n';
  }
  write_text_report(out, o.report, report.str());
  out.commit();
  std::cout << report.str();
  return 0;
}

int cmd_ppl(const CommonOptions& c, const PplOptions& o) {
  require(!o.text.empty(), "--text is required");
  require(!o.lm.ngram.empty() || !o.lm.uni.empty() || !o.lm.model.empty(),
          "give at least one of --ngram, --uni, --model");
  const LoadedLms lms = load_lms(o.lm, false);
  require(lms.ngram || !(lms.uni && lms.has_future()),
          "combining --uni and --model needs --ngram");
  const auto corpus = TokenizedCorpus::from_lines(lms.vocab, read_lines(o.text));
  const InterpConfig interp{o.lm.lambda1, o.lm.lambda2};
  const SmoothingConfig sm{o.lm.alpha};

  // Per-sentence scores are computed in parallel and assembled in order.
  std::vector<std::vector<double>> scores(corpus.sentences.size());
  const LmSet set = lms.set();
  if (lms.ngram) check_lms(set);
  parallel_for(corpus.sentences.size(), c.jobs, [&](std::size_t i) {
    const auto& s = corpus.sentences[i];
    if (lms.ngram) {
      for (const auto& w : sentence_components(set, s, sm)) {
        scores[i].push_back(combined_logprob(w, interp));
      }
    } else if (lms.uni) {
      scores[i] = uni_word_logprobs(*lms.uni, s);
    } else if (lms.su) {
      scores[i] = su_word_logprobs(*lms.su, s);
    } else {
      scores[i] = bi_word_logprobs(*lms.bi, s);
    }
  });
  std::size_t next = 0;
  const WordScorer replay = [&](std::span<const WordId>) { return scores[next++]; };
  const EvalReport r = lms.has_future() ? pseudo_perplexity(replay, corpus)
                                        : perplexity(replay, corpus);
  StagedOutputs out;
  if (!o.report.empty()) r.write_text(out.open(o.report));
  if (!o.table.empty()) r.write_table(out.open(o.table));
  out.commit();
  r.write_text(std::cout);
  return 0;
}

int cmd_viterbi(const CommonOptions& c, const ViterbiOptions& o) {
  require(!o.lattices.empty(), "--lattices is required");
  check_scales(o.scales);
  const auto files = list_files(o.lattices, ".slf");
  std::vector<std::string> ids(files.size());
  std::vector<std::vector<std::string>> hyps(files.size());
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    ids[i] = files[i].stem().string();
    hyps[i] = words_only(best_path(load_slf(files[i]), to_scales(o.scales)).words);
  });
  StagedOutputs out;
  const std::string summary = score_transcripts(ids, hyps, o.refs, out, o.hyp);
  write_text_report(out, o.report, summary);
  out.commit();
  std::cout << summary;
  return 0;
}

int cmd_nbest(const CommonOptions& c, const NbestOptions& o) {
  require(!o.lattices.empty() && !o.out.empty(), "--lattices and --out are required");
  require(o.n >= 1, "--n must be at least 1");
  check_scales(o.scales);
  const auto files = list_files(o.lattices, ".slf");
  std::vector<std::string> texts(files.size());
  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    std::ostringstream s;
    write_nbest(nbest(load_slf(files[i]), o.n, to_scales(o.scales)), s);
    texts[i] = s.str();
  });
  StagedOutputs out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    out.open(fs::path(o.out) / (files[i].stem().string() + ".nbest")) << texts[i];
  }
  out.commit();
  std::cout << "lists: " << files.size() << '\n';
  return 0;
}

int cmd_rescore(const CommonOptions& c, const RescoreOptions& o) {
  require(o.lattices.empty() != o.nbest.empty(), "give exactly one of --lattices and --nbest");
  require(o.ngram_approx == 0 || o.ngram_approx >= 2, "--ngram-approx must be 0 or at least 2");
  require(!o.beam || *o.beam >= 0.0, "--beam must be non-negative");
  require(!o.pre_expand || o.beam, "--pre-expand needs --beam");
  check_scales(o.scales);
  const LoadedLms lms = load_lms(o.lm, true);
  require(!o.pre_expand || lms.uni, "--pre-expand needs --uni");
  const LmSet set = lms.set();
  check_lms(set);
  const InterpConfig interp{o.lm.lambda1, o.lm.lambda2};
  const Scales scales = to_scales(o.scales);

  const bool lattice_mode = !o.lattices.empty();
  require(!(lattice_mode && lms.bi), "bi models need full sentences; rescore N-best lists instead");
  const auto files = lattice_mode ? list_files(o.lattices, ".slf") : list_files(o.nbest, ".nbest");
  std::vector<std::string> ids(files.size()), texts(files.size());
  std::vector<std::vector<std::string>> hyps(files.size());
  std::vector<std::size_t> nodes_in(files.size()), nodes_out(files.size());

  surnn::RescoreOptions ro;
  ro.ngram_approx = o.ngram_approx;
  ro.interp = interp;
  ro.smoothing = SmoothingConfig{o.lm.alpha};
  ro.use_cache = !o.no_cache;
  ro.scales = scales;
  const ComponentScorer scorer =
      lattice_mode ? ComponentScorer{} : make_component_scorer(set, SmoothingConfig{o.lm.alpha});

  parallel_for(files.size(), c.jobs, [&](std::size_t i) {
    ids[i] = files[i].stem().string();
    std::ostringstream s;
    if (lattice_mode) {
      Lattice lat = load_slf(files[i]);
      nodes_in[i] = lat.nodes.size();
      if (o.beam) {
        if (o.pre_expand) {
          LmSet uni_only = set;
          uni_only.su = nullptr;
          lat = rescore_lattice(lat, uni_only, ro).lattice;
        }
        lat = prune(lat, *o.beam, scales);
      }
      const RescoreResult r = rescore_lattice(lat, set, ro);
      nodes_out[i] = r.lattice.nodes.size();
      hyps[i] = words_only(best_path(r.lattice, scales).words);
      write_slf(r.lattice, s);
    } else {
      std::ifstream in(files[i], std::ios::binary);
      if (!in) throw FormatError("cannot open N-best list", files[i].string());
      const NBestList list =
          rescore_nbest(read_nbest(in, files[i].string()), scorer, interp, scales);
      if (list.empty()) throw FormatError("empty N-best list", files[i].string());
      hyps[i] = words_only(list.front().words);
      write_nbest(list, s);
    }
    texts[i] = s.str();
  });

  StagedOutputs out;
  if (!o.out.empty()) {
    const char* ext = lattice_mode ? ".slf" : ".nbest";
    for (std::size_t i = 0; i < files.size(); ++i) {
      out.open(fs::path(o.out) / (ids[i] + ext)) << texts[i];
    }
  }
  std::string summary = score_transcripts(ids, hyps, o.refs, out, o.hyp);
  if (lattice_mode) {
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      a += nodes_in[i];
      b += nodes_out[i];
    }
    summary += "nodes_in: " + std::to_string(a) + "\nnodes_out: " + std::to_string(b) + '\n';
  }
  write_text_report(out, o.report, summary);
  out.commit();
  std::cout << summary;
  return 0;
}

int cmd_tune(const CommonOptions& c, const TuneOptions& o) {
  require(o.objective == "wer" || o.objective == "ppl", "--objective must be wer or ppl");
  require(o.step > 0.0 && o.step <= 1.0, "--step must be in (0, 1]");
  const LoadedLms lms = load_lms(o.lm, true);
  const LmSet set = lms.set();
  check_lms(set);
  std::vector<double> grid;
  const auto steps = static_cast<int>(std::lround(1.0 / o.step));
  for (int i = 0; i <= steps; ++i) grid.push_back(std::min(1.0, i * o.step));
  const SmoothingConfig sm{o.lm.alpha};

  std::ostringstream summary;
  if (o.objective == "ppl") {
    require(!o.text.empty(), "--objective ppl needs --text");
    require(lms.uni && !lms.has_future(), "--objective ppl tunes the n-gram/uni weight only");
    const auto corpus = TokenizedCorpus::from_lines(lms.vocab, read_lines(o.text));
    std::vector<std::vector<WordComponents>> per(corpus.sentences.size());
    parallel_for(per.size(), c.jobs,
                 [&](std::size_t i) { per[i] = sentence_components(set, corpus.sentences[i], sm); });
    std::vector<WordComponents> words;
    for (auto& p : per) words.insert(words.end(), p.begin(), p.end());
    const GridResult g = grid_search_ppl(words, grid);
    summary << "lambda1: " << format_double(g.lambda1) << '\n'
            << "ppl: " << format_double(g.objective) << '\n';
  } else {
    require(!o.lattices.empty() && !o.refs.empty(), "--objective wer needs --lattices and --refs");
    require(lms.uni || lms.has_future(), "nothing to tune without --uni or --model");
    check_scales(o.scales);
    const auto refs = load_refs(o.refs);
    const auto files = list_files(o.lattices, ".slf");
    const ComponentScorer scorer = make_component_scorer(set, sm);
    std::vector<DevUtterance> dev(files.size());
    parallel_for(files.size(), c.jobs, [&](std::size_t i) {
      const auto id = files[i].stem().string();
      auto it = refs.find(id);
      if (it == refs.end()) throw FormatError("no reference for '" + id + "'", o.refs);
      dev[i].ref_length = it->second.size();
      for (const auto& h : nbest(load_slf(files[i]), o.n, to_scales(o.scales))) {
        ScoredHypothesis sh;
        sh.words = scorer(h.words);
        sh.acoustic = h.acoustic;
        sh.errors = wer(it->second, words_only(h.words)).errors();
        dev[i].hyps.push_back(std::move(sh));
      }
    });
    // A weight with no effect on the score stays at its default.
    const bool both = lms.uni && lms.has_future();
    const std::vector<double> l2 = both ? grid : std::vector<double>{o.lm.lambda2};
    const GridResult g = grid_search_wer(dev, grid, l2, o.scales.acoustic, o.scales.lm);
    summary << "lambda1: " << format_double(g.lambda1) << '\n'
            << "lambda2: " << format_double(g.lambda2) << '\n'
            << "wer: " << format_double(100.0 * g.objective) << '\n';
  }
  StagedOutputs out;
  write_text_report(out, o.report, summary.str());
  out.commit();
  std::cout << summary.str();
  return 0;
}

}  // namespace surnn::cli
