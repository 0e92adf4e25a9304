#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "surnn/corpus.hpp"
#include "surnn/interpolate.hpp"
#include "surnn/lattice.hpp"
#include "surnn/models.hpp"
#include "surnn/ngram.hpp"

namespace surnn {

// Language models available to a rescoring run. The n-gram model is
// mandatory; the recurrent models are optional and enter the two-stage
// combination as described in combined_logprob(). When only a bi/su model is
// present it takes the uni model's place in the linear stage, unsmoothed.
struct LmSet {
  const Vocabulary* vocab = nullptr;
  const ArpaModel* ngram = nullptr;
  const UniRnnlm* uni = nullptr;
  const SuRnnlm* su = nullptr;
  const BiRnnlm* bi = nullptr;  // N-best only
};

struct RescoreOptions {
  // Paths whose last n-1 tokens agree are merged; 0 disables merging.
  int ngram_approx = 3;
  InterpConfig interp;
  SmoothingConfig smoothing{0.7};
  bool use_cache = true;
  Scales scales;
};

struct RescoreStats {
  std::size_t candidates = 0;   // state extensions considered
  std::size_t merged = 0;       // candidates absorbed by an existing state
  std::size_t nn_steps = 0;     // recurrent steps actually computed
  std::size_t cache_hits = 0;
};

struct RescoreResult {
  Lattice lattice;
  // Input node of every output node.
  std::vector<std::size_t> origin;
  RescoreStats stats;
};

// Expands and rescores a lattice. Each output node stands for one
// (input node, expansion key) pair where the key is the last n-1 tokens of
// the history and, for su models, the k words that follow.
RescoreResult rescore_lattice(const Lattice& lattice, const LmSet& lms, const RescoreOptions& opts);
RescoreResult rescore_lattice_uni(const Lattice& lattice, const Vocabulary& vocab,
                                  const ArpaModel& ngram, const UniRnnlm& uni,
                                  const RescoreOptions& opts);
// `uni` may be null.
RescoreResult rescore_lattice_su(const Lattice& lattice, const Vocabulary& vocab,
                                 const ArpaModel& ngram, const UniRnnlm* uni, const SuRnnlm& su,
                                 const RescoreOptions& opts);

// Distinct k-word futures (</s> then <pad> filled) of every node.
std::vector<std::vector<std::vector<WordId>>> node_futures(const Lattice& lattice,
                                                           const Vocabulary& vocab, int k);

// Per-token model components of an encoded sentence (<s> ... </s>); one
// entry per predicted token. Does not validate `lms`.
std::vector<WordComponents> sentence_components(const LmSet& lms, std::span<const WordId> ids,
                                               SmoothingConfig smoothing);
void check_lms(const LmSet& lms);

// Per-token model components (every word plus </s>) of a hypothesis.
using ComponentScorer = std::function<std::vector<WordComponents>(std::span<const std::string>)>;
ComponentScorer make_component_scorer(const LmSet& lms, SmoothingConfig smoothing);

// Replaces the lm score of every hypothesis with the summed two-stage score
// and re-ranks by scaled total; ties keep the input order.
NBestList rescore_nbest(const NBestList& list, const ComponentScorer& scorer,
                        const InterpConfig& interp, const Scales& scales);

}  // namespace surnn
