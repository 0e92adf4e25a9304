#include "surnn/rescore.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_map>

#include "surnn/error.hpp"

namespace surnn {

namespace {

using Ids = std::vector<WordId>;
using VecPtr = std::shared_ptr<const Vector>;

struct IdsHash {
  std::size_t operator()(const Ids& ids) const {
    std::size_t h = 1469598103934665603ull;
    for (WordId id : ids) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(id));
      h *= 1099511628211ull;
    }
    return h;
  }
};

template <typename V>
using IdsMap = std::unordered_map<Ids, V, IdsHash>;

bool is_epsilon(const std::string& word) { return word == kNullWord || word == kSentBeginToken; }

// Recurrent quantities for a history, computed on demand and optionally
// memoized under the complete history (plus the future window for su).
class NetEvaluator {
 public:
  NetEvaluator(const LmSet& lms, const RescoreOptions& opts, RescoreStats& stats)
      : lms_(lms), opts_(opts), stats_(stats) {}

  // State after consuming history.back(), given the state before it.
  VecPtr uni_next(const Ids& history, const Vector& prev) {
    return memo(uni_next_, history, [&] { return uni_advance(*lms_.uni, prev, history.back()); });
  }
  VecPtr su_next(const Ids& history, const Vector& prev) {
    return memo(su_next_, history, [&] { return su_advance(*lms_.su, prev, history.back()); });
  }
  VecPtr uni_lp(const Ids& history, const Vector& next) {
    return memo(uni_lp_, history, [&] {
      ++stats_.nn_steps;
      return row_logprobs(uni_logits(*lms_.uni, next), SmoothingConfig{1.0});
    });
  }
  VecPtr su_lp(const Ids& history, std::span<const WordId> window, const Vector& next) {
    Ids key;
    if (opts_.use_cache) {
      key = history;
      key.push_back(-1);
      key.insert(key.end(), window.begin(), window.end());
    }
    // Without a uni model the su model stands in the linear stage unsmoothed.
    const SmoothingConfig sm = lms_.uni ? opts_.smoothing : SmoothingConfig{1.0};
    return memo(su_lp_, key, [&] {
      ++stats_.nn_steps;
      return row_logprobs(su_logits(*lms_.su, next, window), sm);
    });
  }

 private:
  template <typename F>
  VecPtr memo(IdsMap<VecPtr>& map, const Ids& key, F&& compute) {
    if (!opts_.use_cache) return std::make_shared<const Vector>(compute());
    auto it = map.find(key);
    if (it != map.end()) {
      ++stats_.cache_hits;
      return it->second;
    }
    auto v = std::make_shared<const Vector>(compute());
    map.emplace(key, v);
    return v;
  }

  const LmSet& lms_;
  const RescoreOptions& opts_;
  RescoreStats& stats_;
  IdsMap<VecPtr> uni_next_, su_next_, uni_lp_, su_lp_;
};

struct State {
  std::size_t node = 0;
  Ids history;         // complete, starting with <s>
  Vector uni_prev;     // recurrent states before consuming history.back()
  Vector su_prev;
  double score = 0.0;  // accumulated scaled score
};

}  // namespace

void check_lms(const LmSet& lms) {
  if (!lms.vocab || !lms.ngram) throw UsageError("rescoring needs a vocabulary and an n-gram model");
  if (!lms.ngram->bound()) throw UsageError("n-gram model is not bound to the vocabulary");
  auto check = [&](const ModelConfig& c, const char* what) {
    if (c.vocab_size != lms.vocab->size() || c.shortlist != lms.vocab->shortlist_size()) {
      throw UsageError(std::string(what) + " model does not match the vocabulary");
    }
  };
  if (lms.uni) check(lms.uni->config, "uni");
  if (lms.su) check(lms.su->config, "su");
  if (lms.bi) check(lms.bi->config, "bi");
  if (lms.su && lms.bi) throw UsageError("use either a su or a bi model, not both");
}

std::vector<std::vector<Ids>> node_futures(const Lattice& lat, const Vocabulary& vocab, int k) {
  if (k < 0) throw UsageError("number of succeeding words must be non-negative");
  const auto order = lat.topological_order();
  const auto out = lat.outgoing();
  const auto K = static_cast<std::size_t>(k);
  Ids end_window(K, vocab.pad());
  if (K > 0) end_window[0] = vocab.sent_end();

  std::vector<std::vector<Ids>> futures(lat.nodes.size());
  const std::size_t fin = lat.final();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto u = *it;
    if (u == fin) {
      futures[u] = {end_window};
      continue;
    }
    std::set<Ids> set;
    for (auto a : out[u]) {
      const auto& arc = lat.arcs[a];
      if (is_epsilon(arc.word)) {
        set.insert(futures[arc.end].begin(), futures[arc.end].end());
      } else if (arc.word == kSentEndToken) {
        set.insert(end_window);
      } else {
        for (const auto& f : futures[arc.end]) {
          Ids w;
          if (K > 0) {
            w.push_back(vocab.id(arc.word));
            w.insert(w.end(), f.begin(), f.begin() + static_cast<std::ptrdiff_t>(K - 1));
          }
          set.insert(std::move(w));
        }
      }
    }
    futures[u].assign(set.begin(), set.end());
  }
  return futures;
}

RescoreResult rescore_lattice(const Lattice& lat, const LmSet& lms, const RescoreOptions& opts) {
  check_lms(lms);
  opts.interp.validate();
  if (opts.ngram_approx < 0 || opts.ngram_approx == 1) {
    throw UsageError("n-gram approximation order must be 0 (off) or at least 2");
  }
  if (!(opts.smoothing.alpha > 0.0)) throw UsageError("smoothing factor must be positive");
  lat.validate();

  const Vocabulary& vocab = *lms.vocab;
  const OutputMap map = vocab.output_map();
  const int k = lms.su ? lms.su->succ() : 0;
  const auto K = static_cast<std::size_t>(k);
  const auto order = lat.topological_order();
  const auto out = lat.outgoing();
  const auto futures = node_futures(lat, vocab, k);
  const std::size_t init = lat.initial(), fin = lat.final();
  const Ids pad_window(K, vocab.pad());

  RescoreResult result;
  NetEvaluator net(lms, opts, result.stats);

  // Natural-log combined score of `word` after `s.history`. The su model
  // sees `window`. Fills the recurrent states after history.back().
  auto word_score = [&](const Ids& history, const Vector& uni_prev, const Vector& su_prev,
                        WordId word, std::span<const WordId> window, Vector* uni_next_out,
                        Vector* su_next_out) {
    WordComponents c;
    c.ngram = lms.ngram->prob(history, word);
    if (lms.uni) {
      const VecPtr next = net.uni_next(history, uni_prev);
      const VecPtr lp = net.uni_lp(history, *next);
      c.uni = std::exp(map.word_logprob((*lp)(static_cast<Index>(map.row(word))), word));
      if (uni_next_out) *uni_next_out = *next;
    }
    if (lms.su) {
      const VecPtr next = net.su_next(history, su_prev);
      const VecPtr lp = net.su_lp(history, window, *next);
      const double p = std::exp(map.word_logprob((*lp)(static_cast<Index>(map.row(word))), word));
      if (lms.uni) {
        c.future = p;
      } else {
        c.uni = p;
      }
      if (su_next_out) *su_next_out = *next;
    }
    return combined_logprob(c, opts.interp);
  };

  std::vector<State> states;
  std::vector<IdsMap<std::size_t>> index(lat.nodes.size());
  struct OutArc {
    std::size_t from, to, arc;
    double lm;
  };
  std::vector<OutArc> out_arcs;

  // Key layout: history suffix, a -1 separator, then the future window, or
  // -2 for the wildcard future of states reached from the initial node by
  // epsilon arcs only.
  auto make_key = [&](const Ids& history, const Ids* future) {
    Ids key;
    const std::size_t keep = opts.ngram_approx == 0
                                 ? history.size()
                                 : std::min(history.size(), static_cast<std::size_t>(opts.ngram_approx - 1));
    key.assign(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
    key.push_back(-1);
    if (future) {
      key.insert(key.end(), future->begin(), future->end());
    } else {
      key.push_back(-2);
    }
    return key;
  };

  {
    State s0;
    s0.node = init;
    s0.history = {vocab.sent_begin()};
    if (lms.uni) s0.uni_prev = lms.uni->initial_state();
    if (lms.su) s0.su_prev = lms.su->initial_state();
    const Ids empty;
    index[init].emplace(make_key(s0.history, K > 0 ? nullptr : &empty), 0);
    states.push_back(std::move(s0));
  }
  std::vector<Ids> state_future = {K > 0 ? Ids{-2} : Ids{}};
  std::vector<bool> wildcard = {K > 0};

  auto offer = [&](std::size_t from, std::size_t v, std::size_t arc, double lm, State cand,
                   const Ids* future) {
    ++result.stats.candidates;
    const Ids key = v == fin ? Ids{-3} : make_key(cand.history, future);
    auto [it, inserted] = index[v].try_emplace(key, states.size());
    if (inserted) {
      states.push_back(std::move(cand));
      state_future.push_back(future ? *future : Ids{-2});
      wildcard.push_back(future == nullptr);
    } else {
      ++result.stats.merged;
      State& cur = states[it->second];
      if (cand.score > cur.score) cur = std::move(cand);
    }
    out_arcs.push_back({from, it->second, arc, lm});
  };

  for (auto u : order) {
    // States at u are final once all predecessors are processed; collect ids
    // in creation order.
    std::vector<std::size_t> here;
    for (const auto& [key, id] : index[u]) here.push_back(id);
    std::sort(here.begin(), here.end());
    for (auto sid : here) {
      // Copies: `states` may reallocate inside offer().
      const State s = states[sid];
      const bool wild = wildcard[sid];
      const Ids fu = state_future[sid];
      const bool ended = s.history.back() == vocab.sent_end();
      for (auto a : out[u]) {
        const auto& arc = lat.arcs[a];
        const auto v = arc.end;

        if (is_epsilon(arc.word)) {
          double lm = 0.0;
          State cand = s;
          if (v == fin && !ended) {
            lm = word_score(s.history, s.uni_prev, s.su_prev, vocab.sent_end(), pad_window,
                            nullptr, nullptr);
            cand.history.push_back(vocab.sent_end());
          }
          cand.node = v;
          cand.score = s.score + opts.scales.acoustic * arc.acoustic + opts.scales.lm * lm;
          if (wild) {
            offer(sid, v, a, lm, std::move(cand), nullptr);
          } else if (v == fin || std::find(futures[v].begin(), futures[v].end(), fu) != futures[v].end()) {
            offer(sid, v, a, lm, std::move(cand), &fu);
          }
          continue;
        }
        if (ended) {
          throw FormatError("word '" + arc.word + "' follows </s>", lat.utterance);
        }
        const WordId w = vocab.id(arc.word);
        const bool is_end = w == vocab.sent_end();
        for (const auto& fv : futures[v]) {
          Ids window = is_end ? pad_window : fv;
          if (!wild && K > 0) {
            Ids first;
            if (is_end) {
              first.assign(K, vocab.pad());
              first[0] = w;
            } else {
              first.push_back(w);
              first.insert(first.end(), fv.begin(), fv.begin() + static_cast<std::ptrdiff_t>(K - 1));
            }
            if (first != fu) continue;
          }
          State cand;
          cand.node = v;
          double lm = word_score(s.history, s.uni_prev, s.su_prev, w, window, &cand.uni_prev,
                                 &cand.su_prev);
          cand.history = s.history;
          cand.history.push_back(w);
          if (v == fin && !is_end) {
            lm += word_score(cand.history, cand.uni_prev, cand.su_prev, vocab.sent_end(),
                             pad_window, nullptr, nullptr);
            cand.history.push_back(vocab.sent_end());
          }
          cand.score = s.score + opts.scales.acoustic * arc.acoustic + opts.scales.lm * lm;
          offer(sid, v, a, lm, std::move(cand), &fv);
        }
      }
    }
  }

  // Output nodes in (input topological position, creation) order.
  std::vector<std::size_t> pos(lat.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::vector<std::size_t> by_pos(states.size());
  std::iota(by_pos.begin(), by_pos.end(), 0);
  std::stable_sort(by_pos.begin(), by_pos.end(), [&](std::size_t a, std::size_t b) {
    return pos[states[a].node] < pos[states[b].node];
  });
  std::vector<std::size_t> renum(states.size());
  Lattice& ol = result.lattice;
  ol.utterance = lat.utterance;
  for (std::size_t i = 0; i < by_pos.size(); ++i) {
    renum[by_pos[i]] = i;
    ol.nodes.push_back(lat.nodes[states[by_pos[i]].node]);
    result.origin.push_back(states[by_pos[i]].node);
  }
  for (const auto& oa : out_arcs) {
    LatticeArc arc = lat.arcs[oa.arc];
    arc.start = renum[oa.from];
    arc.end = renum[oa.to];
    arc.lm = oa.lm;
    ol.arcs.push_back(std::move(arc));
  }
  ol.validate();
  return result;
}

RescoreResult rescore_lattice_uni(const Lattice& lattice, const Vocabulary& vocab,
                                  const ArpaModel& ngram, const UniRnnlm& uni,
                                  const RescoreOptions& opts) {
  LmSet lms;
  lms.vocab = &vocab;
  lms.ngram = &ngram;
  lms.uni = &uni;
  return rescore_lattice(lattice, lms, opts);
}

RescoreResult rescore_lattice_su(const Lattice& lattice, const Vocabulary& vocab,
                                 const ArpaModel& ngram, const UniRnnlm* uni, const SuRnnlm& su,
                                 const RescoreOptions& opts) {
  LmSet lms;
  lms.vocab = &vocab;
  lms.ngram = &ngram;
  lms.uni = uni;
  lms.su = &su;
  return rescore_lattice(lattice, lms, opts);
}

std::vector<WordComponents> sentence_components(const LmSet& lms, std::span<const WordId> ids,
                                               SmoothingConfig smoothing) {
  const SmoothingConfig future_sm = lms.uni ? smoothing : SmoothingConfig{1.0};
  const auto ng = lms.ngram->sentence_logprobs(ids);
  std::vector<double> uni, fut;
  if (lms.uni) uni = uni_word_logprobs(*lms.uni, ids);
  if (lms.su) fut = su_word_logprobs(*lms.su, ids, future_sm);
  if (lms.bi) fut = bi_word_logprobs(*lms.bi, ids, future_sm);
  std::vector<WordComponents> comps(ng.size());
  for (std::size_t i = 0; i < ng.size(); ++i) {
    comps[i].ngram = std::exp(ng[i]);
    if (lms.uni) comps[i].uni = std::exp(uni[i]);
    if (!fut.empty()) {
      if (lms.uni) {
        comps[i].future = std::exp(fut[i]);
      } else {
        comps[i].uni = std::exp(fut[i]);
      }
    }
  }
  return comps;
}

ComponentScorer make_component_scorer(const LmSet& lms, SmoothingConfig smoothing) {
  check_lms(lms);
  return [lms, smoothing](std::span<const std::string> words) {
    std::vector<std::string> kept;
    for (const auto& w : words) {
      if (!is_epsilon(w) && w != kSentEndToken) kept.push_back(w);
    }
    const Ids ids = encode(*lms.vocab, kept);
    return sentence_components(lms, ids, smoothing);
  };
}

NBestList rescore_nbest(const NBestList& list, const ComponentScorer& scorer,
                        const InterpConfig& interp, const Scales& scales) {
  interp.validate();
  NBestList out = list;
  for (auto& h : out) {
    h.lm = 0.0;
    for (const auto& c : scorer(h.words)) h.lm += combined_logprob(c, interp);
    h.total = scales.acoustic * h.acoustic + scales.lm * h.lm;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.total > b.total; });
  return out;
}

}  // namespace surnn
