#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "surnn/corpus.hpp"

namespace surnn {

// Natural-log probability of every predicted token (positions 1..n-1) of an
// encoded sentence.
using WordScorer = std::function<std::vector<double>(std::span<const WordId>)>;

struct SentenceScore {
  std::size_t tokens = 0;
  double logprob = 0.0;
};

struct EvalReport {
  bool pseudo = false;  // sentence-level normalization not available
  std::size_t tokens = 0;
  std::size_t sentences = 0;
  double total_logprob = 0.0;
  double value = 0.0;
  std::vector<SentenceScore> per_sentence;

  // "ppl" or "pseudo_ppl": a bi/su report never carries the plain label.
  std::string label() const { return pseudo ? "pseudo_ppl" : "ppl"; }
  // exp(-total_logprob / tokens).
  double recompute() const;
  // key: value lines.
  void write_text(std::ostream& out) const;
  // Tab-separated table, one row per sentence plus a header.
  void write_table(std::ostream& out) const;
};

EvalReport perplexity(const WordScorer& scorer, const TokenizedCorpus& corpus);
EvalReport pseudo_perplexity(const WordScorer& scorer, const TokenizedCorpus& corpus);

struct WerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double rate() const;
  WerResult& operator+=(const WerResult& o);
};

// Unit-cost Levenshtein alignment; among equal-cost alignments a
// substitution is preferred over a deletion/insertion pair.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

}  // namespace surnn
