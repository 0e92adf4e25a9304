#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "surnn/corpus.hpp"
#include "surnn/nn.hpp"

namespace surnn {

enum class Arch { kUni, kBi, kSu };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);

struct ModelConfig {
  Arch arch = Arch::kUni;
  std::size_t vocab_size = 0;
  std::size_t shortlist = 0;
  Index embed = 16;
  Index hidden = 32;
  // su only: number of succeeding words and width of the future unit.
  int succ = 0;
  Index future_hidden = 0;

  static ModelConfig for_vocab(Arch arch, const Vocabulary& vocab, Index embed, Index hidden,
                               int succ = 0, Index future_hidden = -1);

  OutputMap output_map() const { return {vocab_size, shortlist}; }
  Index output_size() const { return static_cast<Index>(shortlist + 2); }
  Index context_size() const;
  // Special ids follow the vocabulary layout: the six specials close the table.
  WordId sent_begin_id() const { return static_cast<WordId>(vocab_size) - 6; }
  WordId sent_end_id() const { return static_cast<WordId>(vocab_size) - 5; }
  WordId null_id() const { return static_cast<WordId>(vocab_size) - 2; }
  WordId pad_id() const { return static_cast<WordId>(vocab_size) - 1; }
  void validate() const;
};

struct SmoothingConfig {
  double alpha = 1.0;
};

// Output of one prediction step: the next recurrent state, the pre-softmax
// activations and the distribution over the output rows.
struct StepResult {
  Vector state;
  Vector logits;
  Vector dist;
};

class UniRnnlm {
 public:
  UniRnnlm() = default;
  explicit UniRnnlm(const ModelConfig& config);

  ModelConfig config;
  Matrix embedding;  // vocab x embed
  GruCell gru;
  OutputLayer output;

  void init_random(std::uint64_t seed, double scale = 0.1);
  ParamList params();
  UniRnnlm zeros_like() const { return UniRnnlm(config); }
  Vector initial_state() const { return Vector::Zero(config.hidden); }
};

class BiRnnlm {
 public:
  BiRnnlm() = default;
  explicit BiRnnlm(const ModelConfig& config);

  ModelConfig config;
  Matrix embedding;  // shared by both directions
  GruCell forward;
  GruCell backward;
  OutputLayer output;  // over [h_{t-1}; h~_{t+1}]

  void init_random(std::uint64_t seed, double scale = 0.1);
  ParamList params();
  BiRnnlm zeros_like() const { return BiRnnlm(config); }
};

class SuRnnlm {
 public:
  SuRnnlm() = default;
  explicit SuRnnlm(const ModelConfig& config);
  // A k = 0 model carrying the uni model's weights.
  static SuRnnlm from_uni(const UniRnnlm& uni);

  ModelConfig config;
  Matrix embedding;
  GruCell gru;
  FeedForward future;  // (k * embed) -> future_hidden; empty when k == 0
  OutputLayer output;  // over [h_{t-1}; f]

  int succ() const { return config.succ; }
  void init_random(std::uint64_t seed, double scale = 0.1);
  ParamList params();
  SuRnnlm zeros_like() const { return SuRnnlm(config); }
  Vector initial_state() const { return Vector::Zero(config.hidden); }
  // Future-unit output for a window of exactly k ids; <pad> embeds as zero.
  Vector future_vector(std::span<const WordId> window) const;
};

// Recurrent update on the previous word, and the output activations for the
// resulting state. uni_step() is the composition of the two.
Vector uni_advance(const UniRnnlm& model, const Vector& state, WordId prev_word);
Vector uni_logits(const UniRnnlm& model, const Vector& next_state);
StepResult uni_step(const UniRnnlm& model, const Vector& state, WordId prev_word);
// Log-probability of every predicted token (positions 1..n-1) of an
// encoded sentence; out-of-shortlist words share the OOS mass uniformly.
std::vector<double> uni_word_logprobs(const UniRnnlm& model, std::span<const WordId> sentence,
                                      SmoothingConfig smoothing = {});
double uni_sentence_logprob(const UniRnnlm& model, std::span<const WordId> sentence);

// Per-position output logits for positions 1..n-1 of a complete sentence.
std::vector<Vector> bi_sentence_logits(const BiRnnlm& model, std::span<const WordId> sentence);
std::vector<Vector> bi_sentence_dists(const BiRnnlm& model, std::span<const WordId> sentence);
std::vector<double> bi_word_logprobs(const BiRnnlm& model, std::span<const WordId> sentence,
                                     SmoothingConfig smoothing = {});

Vector su_advance(const SuRnnlm& model, const Vector& state, WordId prev_word);
Vector su_logits(const SuRnnlm& model, const Vector& next_state, std::span<const WordId> future);
StepResult su_step(const SuRnnlm& model, const Vector& state, WordId prev_word,
                   const FutureWindow& future);
std::vector<double> su_word_logprobs(const SuRnnlm& model, std::span<const WordId> sentence,
                                     SmoothingConfig smoothing = {});

// log softmax(alpha * logits), over output rows.
Vector row_logprobs(const Vector& logits, SmoothingConfig smoothing);
// softmax(alpha * logits).
Vector smooth(const Vector& logits, SmoothingConfig cfg);

}  // namespace surnn
