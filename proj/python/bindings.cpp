#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "surnn/error.hpp"
#include "surnn/eval.hpp"
#include "surnn/fixtures.hpp"
#include "surnn/format.hpp"
#include "surnn/interpolate.hpp"
#include "surnn/model_io.hpp"
#include "surnn/rescore.hpp"
#include "surnn/training.hpp"

namespace py = pybind11;
using namespace surnn;

namespace {

struct Model {
  AnyModel model;

  std::string arch() const { return std::string(arch_name(model_config(model).arch)); }
  const UniRnnlm* uni() const { return std::get_if<UniRnnlm>(&model); }
  const SuRnnlm* su() const { return std::get_if<SuRnnlm>(&model); }
  const BiRnnlm* bi() const { return std::get_if<BiRnnlm>(&model); }
};

struct TrainedModel {
  std::shared_ptr<Model> model;
  double words_per_second = 0.0;
  std::vector<double> epoch_losses;
};

Arch parse_arch(const std::string& name) {
  if (name == "uni") return Arch::kUni;
  if (name == "su") return Arch::kSu;
  if (name == "bi") return Arch::kBi;
  throw UsageError("unknown architecture '" + name + "' (expected uni, su or bi)");
}

TrainedModel train_model(const std::string& arch_text, const std::vector<std::string>& lines,
                         const Vocabulary& vocab, Index embed, Index hidden, int succ, int epochs,
                         double lr, std::uint64_t seed) {
  const Arch arch = parse_arch(arch_text);
  if (arch != Arch::kSu && succ != 0) throw UsageError("succ is only meaningful for su models");
  const auto corpus = TokenizedCorpus::from_lines(vocab, lines);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  const auto cfg_model = ModelConfig::for_vocab(arch, vocab, embed, hidden, succ);
  TrainedModel out;
  TrainReport report;
  py::gil_scoped_release release;
  switch (arch) {
    case Arch::kUni: {
      UniRnnlm m(cfg_model);
      m.init_random(seed);
      report = train_uni(m, corpus, cfg);
      out.model = std::make_shared<Model>(Model{std::move(m)});
      break;
    }
    case Arch::kSu: {
      SuRnnlm m(cfg_model);
      m.init_random(seed);
      report = train_su(m, corpus, cfg);
      out.model = std::make_shared<Model>(Model{std::move(m)});
      break;
    }
    case Arch::kBi: {
      BiRnnlm m(cfg_model);
      m.init_random(seed);
      report = train_bi(m, corpus, cfg);
      out.model = std::make_shared<Model>(Model{std::move(m)});
      break;
    }
  }
  out.words_per_second = report.words_per_second();
  for (const auto& e : report.epochs) out.epoch_losses.push_back(e.mean_loss);
  return out;
}

// Owns the models of one rescoring setup so the raw pointers in LmSet stay
// valid for the lifetime of the Python object.
class Rescorer {
 public:
  Rescorer(Vocabulary vocab, ArpaModel ngram, std::shared_ptr<Model> uni,
           std::shared_ptr<Model> future)
      : vocab_(std::move(vocab)), ngram_(std::move(ngram)), uni_(std::move(uni)),
        future_(std::move(future)) {
    ngram_.bind(vocab_);
    if (uni_ && !uni_->uni()) throw UsageError("the uni slot needs a uni model");
    if (future_ && future_->uni()) throw UsageError("the future slot needs an su or bi model");
    lms_ = {&vocab_, &ngram_, uni_ ? uni_->uni() : nullptr, future_ ? future_->su() : nullptr,
            future_ ? future_->bi() : nullptr};
    check_lms(lms_);
  }

  py::tuple rescore(const Lattice& lat, const RescoreOptions& opts) const {
    if (lms_.bi) throw UsageError("bi models rescore N-best lists, not lattices");
    RescoreResult r;
    {
      py::gil_scoped_release release;
      r = rescore_lattice(lat, lms_, opts);
    }
    py::dict stats;
    stats["candidates"] = r.stats.candidates;
    stats["merged"] = r.stats.merged;
    stats["nn_steps"] = r.stats.nn_steps;
    stats["cache_hits"] = r.stats.cache_hits;
    return py::make_tuple(std::move(r.lattice), stats);
  }

  NBestList rescore_list(const NBestList& list, const InterpConfig& interp, double alpha,
                         const Scales& scales) const {
    interp.validate();
    return rescore_nbest(list, make_component_scorer(lms_, {alpha}), interp, scales);
  }

  // Perplexity of text lines, or pseudo-perplexity once a future model is
  // part of the combination.
  double perplexity(const std::vector<std::string>& lines, const InterpConfig& interp,
                    double alpha) const {
    interp.validate();
    const auto corpus = TokenizedCorpus::from_lines(vocab_, lines);
    const WordScorer scorer = [&](std::span<const WordId> s) {
      std::vector<double> out;
      for (const auto& w : sentence_components(lms_, s, {alpha})) out.push_back(combined_logprob(w, interp));
      return out;
    };
    py::gil_scoped_release release;
    return (future_ ? surnn::pseudo_perplexity(scorer, corpus) : surnn::perplexity(scorer, corpus)).value;
  }

  const Vocabulary& vocab() const { return vocab_; }

 private:
  Vocabulary vocab_;
  ArpaModel ngram_;
  std::shared_ptr<Model> uni_, future_;
  LmSet lms_;
};

std::string slf_string(const Lattice& lat) {
  std::ostringstream out;
  write_slf(lat, out);
  return out.str();
}

std::string arpa_string(const ArpaModel& m) {
  std::ostringstream out;
  write_arpa(m, out);
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_surnn, m) {
  m.doc() = "su-RNNLM lattice rescoring";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", [](const std::vector<std::string>& lines, std::optional<std::size_t> shortlist) {
        return Vocabulary::build(lines, shortlist.value_or(kAllWords));
      }, py::arg("lines"), py::arg("shortlist") = py::none())
      .def_static("load", [](const std::filesystem::path& p) { return Vocabulary::load(p); })
      .def("save", &Vocabulary::save)
      .def("__len__", &Vocabulary::size)
      .def("__contains__", [](const Vocabulary& v, const std::string& w) { return v.find(w).has_value(); })
      .def_property_readonly("num_regular", &Vocabulary::num_regular)
      .def_property_readonly("shortlist_size", &Vocabulary::shortlist_size)
      .def("id", [](const Vocabulary& v, const std::string& w) { return v.id(w); })
      .def("word", &Vocabulary::word)
      .def("encode", [](const Vocabulary& v, const std::string& s) { return encode(v, s); });

  py::class_<ArpaModel>(m, "ArpaModel")
      .def_property_readonly("order", &ArpaModel::order)
      .def("logprob", [](const ArpaModel& a, const std::vector<std::string>& history, const std::string& w) {
        return a.logprob_words(history, w);
      }, py::arg("history"), py::arg("word"), "Natural-log probability of `word` after `history`.")
      .def("save", [](const ArpaModel& a, const std::filesystem::path& p) { save_arpa(a, p); })
      .def("to_arpa", &arpa_string);
  m.def("load_arpa", [](const std::filesystem::path& p) { return load_arpa(p); });
  m.def("train_kn", [](const std::vector<std::string>& lines, const Vocabulary& v, int order, double discount) {
    return train_kn(TokenizedCorpus::from_lines(v, lines), v, order, discount);
  }, py::arg("lines"), py::arg("vocab"), py::arg("order") = 3, py::arg("discount") = 0.75);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("arch", &Model::arch)
      .def_property_readonly("succ", [](const Model& x) { return model_config(x.model).succ; })
      .def_property_readonly("hidden", [](const Model& x) { return model_config(x.model).hidden; })
      .def("save", [](const Model& x, const std::filesystem::path& p) { save_model(x.model, p); })
      .def("word_logprobs", [](const Model& x, const std::vector<WordId>& ids, double alpha) {
        if (auto* u = x.uni()) return uni_word_logprobs(*u, ids, {alpha});
        if (auto* s = x.su()) return su_word_logprobs(*s, ids, {alpha});
        return bi_word_logprobs(*x.bi(), ids, {alpha});
      }, py::arg("ids"), py::arg("alpha") = 1.0,
         "Per-token natural-log probabilities of an encoded sentence (<s> ... </s>).");
  m.def("load_model", [](const std::filesystem::path& p) { return std::make_shared<Model>(Model{load_model(p)}); });
  m.def("train_model", [](const std::string& arch, const std::vector<std::string>& lines, const Vocabulary& v,
                          Index embed, Index hidden, int succ, int epochs, double lr, std::uint64_t seed) {
    auto r = train_model(arch, lines, v, embed, hidden, succ, epochs, lr, seed);
    return py::make_tuple(r.model, r.words_per_second, r.epoch_losses);
  }, py::arg("arch"), py::arg("lines"), py::arg("vocab"), py::arg("embed") = 16, py::arg("hidden") = 32,
     py::arg("succ") = 0, py::arg("epochs") = 12, py::arg("lr") = 1.0, py::arg("seed") = 1,
     "Train a model; returns (model, words_per_second, per-epoch mean losses).");

  py::class_<Hypothesis>(m, "Hypothesis")
      .def_readonly("words", &Hypothesis::words)
      .def_readonly("acoustic", &Hypothesis::acoustic)
      .def_readonly("lm", &Hypothesis::lm)
      .def_readonly("total", &Hypothesis::total)
      .def("__repr__", [](const Hypothesis& h) {
        std::string s = "Hypothesis(total=" + std::to_string(h.total) + ", words='";
        for (std::size_t i = 0; i < h.words.size(); ++i) s += (i ? " " : "") + h.words[i];
        return s + "')";
      });

  py::class_<Lattice>(m, "Lattice")
      .def_static("from_slf", [](const std::string& text) {
        std::istringstream in(text);
        return read_slf(in, "<string>");
      })
      .def_readonly("utterance", &Lattice::utterance)
      .def_property_readonly("num_nodes", [](const Lattice& l) { return l.nodes.size(); })
      .def_property_readonly("num_arcs", [](const Lattice& l) { return l.arcs.size(); })
      .def_property_readonly("arcs", [](const Lattice& l) {
        py::list out;
        for (const auto& a : l.arcs) out.append(py::make_tuple(a.start, a.end, a.word, a.acoustic, a.lm));
        return out;
      }, "(start, end, word, acoustic, lm) per arc")
      .def("to_slf", &slf_string)
      .def("save", [](const Lattice& l, const std::filesystem::path& p) { save_slf(l, p); })
      .def("best_path", [](const Lattice& l, double ac, double lm) { return best_path(l, {ac, lm}); },
           py::arg("acoustic_scale") = 1.0, py::arg("lm_scale") = 1.0)
      .def("nbest", [](const Lattice& l, std::size_t n, double ac, double lm) { return nbest(l, n, {ac, lm}); },
           py::arg("n"), py::arg("acoustic_scale") = 1.0, py::arg("lm_scale") = 1.0)
      .def("posteriors", [](const Lattice& l, double ac, double lm) { return posteriors(l, {ac, lm}); },
           py::arg("acoustic_scale") = 1.0, py::arg("lm_scale") = 1.0)
      .def("prune", [](const Lattice& l, double beam, double ac, double lm) { return prune(l, beam, {ac, lm}); },
           py::arg("beam"), py::arg("acoustic_scale") = 1.0, py::arg("lm_scale") = 1.0);
  m.def("load_slf", [](const std::filesystem::path& p) { return load_slf(p); });
  m.def("example_lattice", &example_lattice);

  py::class_<Rescorer>(m, "Rescorer")
      .def(py::init<Vocabulary, ArpaModel, std::shared_ptr<Model>, std::shared_ptr<Model>>(),
           py::arg("vocab"), py::arg("ngram"), py::arg("uni") = nullptr, py::arg("future") = nullptr)
      .def("rescore", [](const Rescorer& r, const Lattice& lat, int ngram_approx, double lambda1, double lambda2,
                         double alpha, bool use_cache, double ac, double lm) {
        RescoreOptions o;
        o.ngram_approx = ngram_approx;
        o.interp = {lambda1, lambda2};
        o.interp.validate();
        if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("alpha must be in (0, 1]");
        o.smoothing = {alpha};
        o.use_cache = use_cache;
        o.scales = {ac, lm};
        return r.rescore(lat, o);
      }, py::arg("lattice"), py::arg("ngram_approx") = 3, py::arg("lambda1") = 0.75, py::arg("lambda2") = 0.3,
         py::arg("alpha") = 0.7, py::arg("use_cache") = true, py::arg("acoustic_scale") = 1.0,
         py::arg("lm_scale") = 1.0, "Returns (rescored lattice, stats dict).")
      .def("rescore_nbest", [](const Rescorer& r, const std::vector<Hypothesis>& list, double lambda1,
                               double lambda2, double alpha, double ac, double lm) {
        return r.rescore_list(list, {lambda1, lambda2}, alpha, {ac, lm});
      }, py::arg("hypotheses"), py::arg("lambda1") = 0.75, py::arg("lambda2") = 0.3, py::arg("alpha") = 0.7,
         py::arg("acoustic_scale") = 1.0, py::arg("lm_scale") = 1.0)
      .def("perplexity", [](const Rescorer& r, const std::vector<std::string>& lines, double lambda1,
                            double lambda2, double alpha) {
        return r.perplexity(lines, {lambda1, lambda2}, alpha);
      }, py::arg("lines"), py::arg("lambda1") = 0.75, py::arg("lambda2") = 0.3, py::arg("alpha") = 0.7);

  m.def("smooth", [](const Vector& logits, double alpha) { return smooth(logits, {alpha}); },
        py::arg("logits"), py::arg("alpha") = 0.7);
  m.def("two_stage", [](double pn, double pu, double pf, double l1, double l2) {
    return two_stage(pn, pu, pf, {l1, l2});
  }, py::arg("p_ngram"), py::arg("p_uni"), py::arg("p_future"), py::arg("lambda1") = 0.75,
     py::arg("lambda2") = 0.3);
  m.def("wer", [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    const auto r = wer(ref, hyp);
    py::dict d;
    d["substitutions"] = r.substitutions;
    d["deletions"] = r.deletions;
    d["insertions"] = r.insertions;
    d["ref_length"] = r.ref_length;
    d["rate"] = r.rate();
    return d;
  });
  m.def("make_fixtures", [](const std::filesystem::path& out, std::size_t train_tokens, std::size_t heldout,
                            std::size_t dev, std::size_t test, std::uint64_t seed) {
    FixtureConfig cfg;
    cfg.seed = seed;
    cfg.train_tokens = train_tokens;
    cfg.heldout_sentences = heldout;
    cfg.dev_utterances = dev;
    cfg.test_utterances = test;
    const auto set = make_fixtures(cfg);
    write_fixtures(set, out);
    Vocabulary::build(set.train, kAllWords).save(out / "vocab.txt");
  }, py::arg("out"), py::arg("train_tokens") = 50000, py::arg("heldout") = 500, py::arg("dev") = 50,
     py::arg("test") = 1000, py::arg("seed") = 1,
     "Write the synthetic corpus, bigram and lattices (plus vocab.txt) under `out`.");
}
