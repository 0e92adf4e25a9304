#include "surnn/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "surnn/error.hpp"

namespace surnn {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecials = {
    kSentBeginToken, kSentEndToken, kOovToken, kOosToken, kNullToken, kPadToken};

}  // namespace

bool is_special_token(std::string_view token) {
  return std::find(kSpecials.begin(), kSpecials.end(), token) != kSpecials.end();
}

std::size_t OutputMap::row(WordId id) const {
  const auto nreg = num_regular();
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
    throw UsageError("word id " + std::to_string(id) + " out of range");
  }
  const auto u = static_cast<std::size_t>(id);
  if (u < nreg) return u < shortlist ? u : oos_row();
  switch (u - nreg) {
    case 1: return sent_end_row();
    case 2: return oos_row();
    default:
      throw UsageError("special token id " + std::to_string(id) + " is not predictable");
  }
}

double OutputMap::word_logprob(double row_logprob, WordId id) const {
  if (!is_oos(id)) return row_logprob;
  return row_logprob - std::log(static_cast<double>(oos_members()));
}

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open file", path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Vocabulary Vocabulary::build(std::span<const std::string> text_lines,
                             std::size_t shortlist_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& line : text_lines) {
    for (auto& w : split_words(line)) {
      if (is_special_token(w)) {
        throw FormatError("reserved token '" + w + "' in corpus text");
      }
      ++counts[w];
    }
  }
  if (counts.empty()) throw FormatError("empty corpus");
  if (shortlist_size != kAllWords && shortlist_size > counts.size() + kNumSpecials) {
    throw UsageError("shortlist size " + std::to_string(shortlist_size) +
                     " exceeds vocabulary size");
  }

  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort on count keeps ties ordered.
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.words_.reserve(ordered.size() + kNumSpecials);
  for (auto& [w, c] : ordered) v.words_.push_back(w);
  for (auto s : kSpecials) v.words_.emplace_back(s);
  v.index_words();
  v.shortlist_ = std::min(shortlist_size, v.num_regular());
  return v;
}

void Vocabulary::index_words() {
  index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<WordId>(i));
  }
}

void Vocabulary::set_shortlist_size(std::size_t shortlist) {
  if (shortlist > num_regular()) {
    throw UsageError("shortlist size " + std::to_string(shortlist) + " exceeds " +
                     std::to_string(num_regular()) + " regular words");
  }
  shortlist_ = shortlist;
}

Vocabulary Vocabulary::read(std::istream& in, std::optional<std::size_t> shortlist_size,
                            const std::string& source) {
  Vocabulary v;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_words(line);
    if (toks.size() != 1) {
      throw FormatError("expected exactly one token per line",
                        source + ":" + std::to_string(lineno));
    }
    v.words_.push_back(std::move(toks[0]));
  }
  if (v.words_.size() < kNumSpecials) {
    throw FormatError("vocabulary lacks the special tokens", source);
  }
  const std::size_t nreg = v.words_.size() - kNumSpecials;
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    const bool special = is_special_token(v.words_[i]);
    if (i < nreg && special) {
      throw FormatError("special token '" + v.words_[i] + "' before the regular words end",
                        source + ":" + std::to_string(i + 1));
    }
    if (i >= nreg && v.words_[i] != kSpecials[i - nreg]) {
      throw FormatError("expected special token '" + std::string(kSpecials[i - nreg]) + "'",
                        source + ":" + std::to_string(i + 1));
    }
  }
  v.index_words();
  if (v.index_.size() != v.words_.size()) {
    throw FormatError("duplicate token in vocabulary", source);
  }
  v.shortlist_ = nreg;
  if (shortlist_size) v.set_shortlist_size(*shortlist_size);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path,
                            std::optional<std::size_t> shortlist_size) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary", path.string());
  return read(in, shortlist_size, path.string());
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& w : words_) out << w << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write vocabulary", path.string());
  write(out);
}

WordId Vocabulary::id(std::string_view word) const {
  auto found = find(word);
  return found ? *found : oov();
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::word(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw UsageError("word id " + std::to_string(id) + " out of range");
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<WordId> encode(const Vocabulary& vocab, std::span<const std::string> words) {
  std::vector<WordId> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(vocab.sent_begin());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.push_back(vocab.sent_end());
  return ids;
}

std::vector<WordId> encode(const Vocabulary& vocab, std::string_view sentence) {
  auto words = split_words(sentence);
  return encode(vocab, words);
}

std::string decode(const Vocabulary& vocab, std::span<const WordId> ids) {
  std::string out;
  for (auto id : ids) {
    if (id == vocab.sent_begin() || id == vocab.sent_end()) continue;
    if (!out.empty()) out += ' ';
    out += vocab.word(id);
  }
  return out;
}

TokenizedCorpus TokenizedCorpus::from_lines(const Vocabulary& vocab,
                                            std::span<const std::string> lines) {
  TokenizedCorpus corpus;
  for (const auto& line : lines) {
    auto words = split_words(line);
    if (words.empty()) continue;
    corpus.sentences.push_back(encode(vocab, words));
    corpus.word_count += corpus.sentences.back().size() - 1;
  }
  return corpus;
}

std::size_t TokenizedCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::size_t SplicedBatch::max_length() const {
  std::size_t m = 0;
  for (const auto& s : streams) m = std::max(m, s.size());
  return m;
}

double SplicedBatch::length_ratio() const {
  if (streams.empty()) return 1.0;
  std::size_t lo = streams.front().size(), hi = lo;
  for (const auto& s : streams) {
    lo = std::min(lo, s.size());
    hi = std::max(hi, s.size());
  }
  return lo == 0 ? std::numeric_limits<double>::infinity()
                 : static_cast<double>(hi) / static_cast<double>(lo);
}

SplicedBatch make_spliced_batches(const TokenizedCorpus& corpus, std::size_t num_streams) {
  if (num_streams == 0) throw UsageError("num_streams must be at least 1");
  if (num_streams > corpus.sentences.size()) {
    throw UsageError("num_streams (" + std::to_string(num_streams) + ") exceeds sentence count (" +
                     std::to_string(corpus.sentences.size()) + ")");
  }
  SplicedBatch batch;
  batch.streams.resize(num_streams);
  batch.origin.resize(num_streams);
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < num_streams; ++s) {
      if (batch.streams[s].size() < batch.streams[best].size()) best = s;
    }
    const auto& sent = corpus.sentences[i];
    auto& stream = batch.streams[best];
    stream.insert(stream.end(), sent.begin(), sent.end());
    for (std::size_t p = 0; p < sent.size(); ++p) {
      batch.origin[best].emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(p));
    }
  }
  batch.step_targets.resize(num_streams);
  for (std::size_t s = 0; s < num_streams; ++s) {
    const auto& stream = batch.streams[s];
    auto& targets = batch.step_targets[s];
    targets.assign(stream.size(), kNoTarget);
    for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
      // A sentence's last token is followed by the next sentence's <s>,
      // which is never predicted.
      if (batch.origin[s][t + 1].second != 0) targets[t] = stream[t + 1];
    }
  }
  return batch;
}

std::vector<AlignedNullBatch> make_null_aligned_batches(const TokenizedCorpus& corpus,
                                                        std::size_t num_streams,
                                                        WordId null_id) {
  if (num_streams == 0) throw UsageError("num_streams must be at least 1");
  if (num_streams > corpus.sentences.size()) {
    throw UsageError("num_streams (" + std::to_string(num_streams) + ") exceeds sentence count (" +
                     std::to_string(corpus.sentences.size()) + ")");
  }
  std::vector<AlignedNullBatch> batches;
  for (std::size_t first = 0; first < corpus.sentences.size(); first += num_streams) {
    const std::size_t last = std::min(first + num_streams, corpus.sentences.size());
    AlignedNullBatch b;
    b.num_rows = last - first;
    for (std::size_t i = first; i < last; ++i) {
      b.num_cols = std::max(b.num_cols, corpus.sentences[i].size());
    }
    b.cells.assign(b.num_rows * b.num_cols, null_id);
    b.null_mask.assign(b.num_rows * b.num_cols, true);
    for (std::size_t r = 0; r < b.num_rows; ++r) {
      const auto& sent = corpus.sentences[first + r];
      for (std::size_t c = 0; c < sent.size(); ++c) {
        b.cells[r * b.num_cols + c] = sent[c];
        b.null_mask[r * b.num_cols + c] = false;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

FutureWindow future_window(std::span<const WordId> sentence, std::size_t t, std::size_t k,
                           WordId pad_id) {
  if (t >= sentence.size()) {
    throw UsageError("future_window position " + std::to_string(t) + " outside sentence");
  }
  FutureWindow w;
  w.ids.resize(k);
  w.pad_mask.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t p = t + 1 + j;
    const bool pad = p >= sentence.size();
    w.ids[j] = pad ? pad_id : sentence[p];
    w.pad_mask[j] = pad;
  }
  return w;
}

}  // namespace surnn
