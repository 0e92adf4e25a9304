#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace surnn {

using WordId = std::int32_t;

// Marks "no prediction at this cell" in target arrays.
inline constexpr WordId kNoTarget = -1;

inline constexpr std::string_view kSentBeginToken = "<s>";
inline constexpr std::string_view kSentEndToken = "</s>";
inline constexpr std::string_view kOovToken = "<oov>";
inline constexpr std::string_view kOosToken = "<oos>";
inline constexpr std::string_view kNullToken = "<null>";
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr int kNumSpecials = 6;

bool is_special_token(std::string_view token);

// Shortlist size that keeps every regular word in the output layer.
inline constexpr std::size_t kAllWords = static_cast<std::size_t>(-1);

// Maps vocabulary ids onto output-layer rows. Rows [0, shortlist) are the
// shortlist words, row `shortlist` is </s>, row `shortlist + 1` is the OOS
// node shared by every out-of-shortlist word and <oov>.
struct OutputMap {
  std::size_t vocab_size = 0;
  std::size_t shortlist = 0;

  std::size_t num_regular() const { return vocab_size - kNumSpecials; }
  std::size_t output_size() const { return shortlist + 2; }
  std::size_t sent_end_row() const { return shortlist; }
  std::size_t oos_row() const { return shortlist + 1; }
  // Number of vocabulary entries sharing the OOS node's mass.
  std::size_t oos_members() const { return num_regular() - shortlist + 1; }
  // Output row for a predictable id; throws for <s>, <null>, <pad>, <oos>.
  std::size_t row(WordId id) const;
  bool is_oos(WordId id) const { return row(id) == oos_row(); }
  // log P(id) given the output distribution's log-probability at row(id).
  double word_logprob(double row_logprob, WordId id) const;
};

// Word <-> id map. Regular words occupy ids [0, num_regular()) ordered by
// descending training frequency (ties lexicographic); the six special
// tokens follow in the fixed order <s> </s> <oov> <oos> <null> <pad>.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary build(std::span<const std::string> text_lines,
                          std::size_t shortlist_size);
  // Reads the one-token-per-line format. `shortlist_size` defaults to all
  // regular words.
  static Vocabulary load(const std::filesystem::path& path,
                         std::optional<std::size_t> shortlist_size = {});
  static Vocabulary read(std::istream& in, std::optional<std::size_t> shortlist_size = {},
                         const std::string& source = "<stream>");
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  std::size_t size() const { return words_.size(); }
  std::size_t num_regular() const { return words_.size() - kNumSpecials; }
  std::size_t shortlist_size() const { return shortlist_; }
  void set_shortlist_size(std::size_t shortlist);

  // Id of `word`, or the OOV id when unknown.
  WordId id(std::string_view word) const;
  std::optional<WordId> find(std::string_view word) const;
  const std::string& word(WordId id) const;
  const std::vector<std::string>& words() const { return words_; }

  WordId sent_begin() const { return special(0); }
  WordId sent_end() const { return special(1); }
  WordId oov() const { return special(2); }
  WordId oos() const { return special(3); }
  WordId null() const { return special(4); }
  WordId pad() const { return special(5); }

  bool in_shortlist(WordId id) const { return id >= 0 && static_cast<std::size_t>(id) < shortlist_; }
  OutputMap output_map() const { return {size(), shortlist_}; }

 private:
  WordId special(int k) const { return static_cast<WordId>(num_regular()) + k; }
  void index_words();

  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  std::size_t shortlist_ = 0;
};

std::vector<std::string> split_words(std::string_view line);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// <s> w1 ... wn </s>; unknown words become <oov>.
std::vector<WordId> encode(const Vocabulary& vocab, std::string_view sentence);
std::vector<WordId> encode(const Vocabulary& vocab, std::span<const std::string> words);
// Inverse of encode: boundary tokens dropped, <oov> printed as its marker.
std::string decode(const Vocabulary& vocab, std::span<const WordId> ids);

struct TokenizedCorpus {
  std::vector<std::vector<WordId>> sentences;
  // Predicted tokens: everything except the leading <s>.
  std::size_t word_count = 0;

  static TokenizedCorpus from_lines(const Vocabulary& vocab, std::span<const std::string> lines);
  std::size_t token_count() const;  // including boundaries
};

// Whole sentences concatenated into parallel streams of comparable length.
struct SplicedBatch {
  std::vector<std::vector<WordId>> streams;
  // targets[s][t] is streams[s][t+1], or kNoTarget at the end of a stream
  // and where a </s> is followed by the next sentence's <s>.
  std::vector<std::vector<WordId>> step_targets;
  // For every stream position, the index of the source sentence and the
  // position within it.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> origin;

  std::size_t num_streams() const { return streams.size(); }
  std::size_t max_length() const;
  double length_ratio() const;  // longest / shortest stream
};

SplicedBatch make_spliced_batches(const TokenizedCorpus& corpus, std::size_t num_streams);

// One minibatch of left-aligned sentences padded with <null>.
struct AlignedNullBatch {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<WordId> cells;      // row-major, num_rows x num_cols
  std::vector<bool> null_mask;    // true on appended <null> cells

  WordId at(std::size_t row, std::size_t col) const { return cells[row * num_cols + col]; }
  bool is_null(std::size_t row, std::size_t col) const { return null_mask[row * num_cols + col]; }
};

std::vector<AlignedNullBatch> make_null_aligned_batches(const TokenizedCorpus& corpus,
                                                        std::size_t num_streams,
                                                        WordId null_id);

struct FutureWindow {
  std::vector<WordId> ids;
  std::vector<bool> pad_mask;
};

// Slots hold sentence[t+1+j], or `pad_id` past the end of the sentence.
FutureWindow future_window(std::span<const WordId> sentence, std::size_t t, std::size_t k,
                           WordId pad_id);

}  // namespace surnn
