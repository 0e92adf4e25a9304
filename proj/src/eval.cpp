#include "surnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "surnn/error.hpp"
#include "surnn/format.hpp"

namespace surnn {

namespace {

EvalReport evaluate(const WordScorer& scorer, const TokenizedCorpus& corpus, bool pseudo) {
  if (corpus.sentences.empty()) throw FormatError("empty corpus");
  EvalReport r;
  r.pseudo = pseudo;
  for (const auto& s : corpus.sentences) {
    const auto lps = scorer(s);
    if (lps.size() + 1 != s.size()) {
      throw UsageError("scorer returned " + std::to_string(lps.size()) + " scores for " +
                       std::to_string(s.size() - 1) + " predicted tokens");
    }
    SentenceScore ss;
    ss.tokens = lps.size();
    for (double lp : lps) ss.logprob += lp;
    r.tokens += ss.tokens;
    r.total_logprob += ss.logprob;
    r.per_sentence.push_back(ss);
  }
  r.sentences = r.per_sentence.size();
  r.value = r.recompute();
  if (std::isnan(r.value)) throw NumericError("perplexity is NaN");
  return r;
}

}  // namespace

double EvalReport::recompute() const {
  return std::exp(-total_logprob / static_cast<double>(tokens));
}

void EvalReport::write_text(std::ostream& out) const {
  out << "kind: " << (pseudo ? "pseudo" : "normalized") << '\n'
      << "sentences: " << sentences << '\n'
      << "tokens: " << tokens << '\n'
      << "total_logprob: " << format_double(total_logprob) << '\n'
      << label() << ": " << format_double(value) << '\n';
}

void EvalReport::write_table(std::ostream& out) const {
  out << "sentence\ttokens\tlogprob\t" << label() << '\n';
  for (std::size_t i = 0; i < per_sentence.size(); ++i) {
    const auto& s = per_sentence[i];
    const double v = std::exp(-s.logprob / static_cast<double>(s.tokens));
    out << i << '\t' << s.tokens << '\t' << format_double(s.logprob) << '\t' << format_double(v)
        << '\n';
  }
}

EvalReport perplexity(const WordScorer& scorer, const TokenizedCorpus& corpus) {
  return evaluate(scorer, corpus, false);
}

EvalReport pseudo_perplexity(const WordScorer& scorer, const TokenizedCorpus& corpus) {
  return evaluate(scorer, corpus, true);
}

double WerResult::rate() const {
  if (ref_length == 0) throw UsageError("word error rate is undefined for an empty reference");
  return static_cast<double>(errors()) / static_cast<double>(ref_length);
}

WerResult& WerResult::operator+=(const WerResult& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

WerResult wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) throw UsageError("word error rate is undefined for an empty reference");
  const std::size_t R = ref.size(), H = hyp.size();
  std::vector<std::size_t> d((R + 1) * (H + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (H + 1) + j]; };
  for (std::size_t i = 0; i <= R; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= H; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  WerResult r;
  r.ref_length = R;
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  return r;
}

}  // namespace surnn
