#include "surnn/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "surnn/error.hpp"

namespace surnn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// w * log(p) with the convention 0 * log(0) = 0.
double weighted_log(double w, double p) {
  if (w == 0.0) return 0.0;
  return p > 0.0 ? w * std::log(p) : kNegInf;
}

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw UsageError(std::string("empty ") + name + " grid");
  for (double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " grid value outside [0, 1]");
  }
}

}  // namespace

void InterpConfig::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw UsageError("lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0 && lambda2 <= 1.0)) throw UsageError("lambda2 must lie in [0, 1]");
}

double linear(double p_ngram, double p_uni, double lambda1) {
  if (lambda1 == 0.0) return p_ngram;
  if (lambda1 == 1.0) return p_uni;
  return (1.0 - lambda1) * p_ngram + lambda1 * p_uni;
}

double loglinear_score(double p_unidir, double p_future, double lambda2) {
  if (lambda2 == 0.0) return p_unidir > 0.0 ? std::log(p_unidir) : kNegInf;
  if (lambda2 == 1.0) return p_future > 0.0 ? std::log(p_future) : kNegInf;
  return weighted_log(1.0 - lambda2, p_unidir) + weighted_log(lambda2, p_future);
}

double two_stage(double p_ngram, double p_uni, double p_future, const InterpConfig& cfg) {
  return loglinear_score(linear(std::max(p_ngram, kNgramFloor), p_uni, cfg.lambda1), p_future,
                         cfg.lambda2);
}

double combined_logprob(const WordComponents& c, const InterpConfig& cfg) {
  const double ng = std::max(c.ngram, kNgramFloor);
  const double unidir = c.uni ? linear(ng, *c.uni, cfg.lambda1) : ng;
  if (!c.future) return unidir > 0.0 ? std::log(unidir) : kNegInf;
  return loglinear_score(unidir, *c.future, cfg.lambda2);
}

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

GridResult grid_search_wer(const std::vector<DevUtterance>& dev, const std::vector<double>& lambda1s,
                           const std::vector<double>& lambda2s, double acoustic_scale,
                           double lm_scale) {
  check_grid(lambda1s, "lambda1");
  check_grid(lambda2s, "lambda2");
  std::size_t ref_words = 0;
  for (const auto& u : dev) ref_words += u.ref_length;
  if (ref_words == 0) throw UsageError("development data has no reference words");

  // Scan in ascending order so a strict improvement is needed to move away
  // from a smaller lambda.
  std::vector<double> l1 = lambda1s, l2 = lambda2s;
  std::sort(l1.begin(), l1.end());
  std::sort(l2.begin(), l2.end());
  GridResult best;
  bool have = false;
  for (double a : l1) {
    for (double b : l2) {
      const InterpConfig cfg{a, b};
      std::size_t errors = 0;
      for (const auto& u : dev) {
        const ScoredHypothesis* top = nullptr;
        double top_score = kNegInf;
        for (const auto& h : u.hyps) {
          double lm = 0.0;
          for (const auto& w : h.words) lm += combined_logprob(w, cfg);
          const double s = acoustic_scale * h.acoustic + lm_scale * lm;
          if (!top || s > top_score) {
            top = &h;
            top_score = s;
          }
        }
        if (top) errors += top->errors;
      }
      const double wer = static_cast<double>(errors) / static_cast<double>(ref_words);
      if (!have || wer < best.objective) {
        best = {a, b, wer};
        have = true;
      }
    }
  }
  return best;
}

GridResult grid_search_ppl(const std::vector<WordComponents>& words,
                           const std::vector<double>& lambda1s) {
  check_grid(lambda1s, "lambda1");
  if (words.empty()) throw UsageError("no words to evaluate perplexity on");
  std::vector<double> l1 = lambda1s;
  std::sort(l1.begin(), l1.end());
  GridResult best;
  bool have = false;
  for (double a : l1) {
    double total = 0.0;
    for (const auto& w : words) {
      const double p = linear(std::max(w.ngram, kNgramFloor), w.uni.value_or(0.0), a);
      total += p > 0.0 ? std::log(p) : kNegInf;
    }
    const double ppl = std::exp(-total / static_cast<double>(words.size()));
    if (!have || ppl < best.objective) {
      best = {a, 0.0, ppl};
      have = true;
    }
  }
  return best;
}

}  // namespace surnn
