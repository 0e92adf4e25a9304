#pragma once

#include <optional>
#include <string>
#include <vector>

namespace surnn {

struct InterpConfig {
  double lambda1 = 0.75;  // linear weight of the uni-RNNLM
  double lambda2 = 0.3;   // log-linear weight of the bi/su model
  void validate() const;
};

// n-gram probabilities are floored here before any log is taken.
inline constexpr double kNgramFloor = 1e-12;

double linear(double p_ngram, double p_uni, double lambda1);
// (1 - lambda2) log p_unidir + lambda2 log p_future. Unnormalized; a zero
// probability yields -inf for the term it enters.
double loglinear_score(double p_unidir, double p_future, double lambda2);
double two_stage(double p_ngram, double p_uni, double p_future, const InterpConfig& cfg);

// Component probabilities of one word. Absent components drop out of the
// combination: without a uni model the n-gram stands alone in the linear
// stage, without a future model the log-linear stage is skipped.
struct WordComponents {
  double ngram = 0.0;
  std::optional<double> uni;
  std::optional<double> future;
};

double combined_logprob(const WordComponents& c, const InterpConfig& cfg);

struct ScoredHypothesis {
  std::vector<WordComponents> words;
  double acoustic = 0.0;  // natural log
  std::size_t errors = 0;  // word errors against the reference
};

// One utterance of development data: competing hypotheses scored word by word.
struct DevUtterance {
  std::vector<ScoredHypothesis> hyps;
  std::size_t ref_length = 0;
};

struct GridResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double objective = 0.0;  // WER or PPL, lower is better
};

std::vector<double> default_grid();

// Exhaustive search minimizing corpus WER of the 1-best hypothesis under
// acoustic_scale * acoustic + lm_scale * lm. Ties go to the smaller lambda1,
// then the smaller lambda2.
GridResult grid_search_wer(const std::vector<DevUtterance>& dev, const std::vector<double>& lambda1s,
                           const std::vector<double>& lambda2s, double acoustic_scale,
                           double lm_scale);
// Minimizes the perplexity of the linear mixture over lambda1 alone; each
// entry holds the reference word's (n-gram, uni) probabilities.
GridResult grid_search_ppl(const std::vector<WordComponents>& words,
                           const std::vector<double>& lambda1s);

}  // namespace surnn
