#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "surnn/corpus.hpp"

namespace surnn {

// Back-off n-gram model in ARPA form. Words are kept as strings in the
// model's own table; bind() attaches a Vocabulary so that lookups can use
// vocabulary ids. Stored numbers are log10, the lookup API returns natural
// logs.
class ArpaModel {
 public:
  static constexpr double kLog10Floor = -99.0;

  struct Entry {
    std::vector<std::string> words;
    double prob10 = 0.0;
    double bow10 = 0.0;
    bool has_bow = false;
  };

  ArpaModel() = default;
  explicit ArpaModel(int order);

  int order() const { return static_cast<int>(sections_.size()); }
  // Entries of order m (1-based) in file order.
  const std::vector<Entry>& entries(int m) const { return sections_.at(static_cast<std::size_t>(m - 1)); }
  void add(Entry entry);

  void bind(const Vocabulary& vocab);
  bool bound() const { return !vocab_map_.empty(); }

  // log P(word | history) with history truncated to the last order-1 ids.
  double logprob(std::span<const WordId> history, WordId word) const;
  double prob(std::span<const WordId> history, WordId word) const;
  // Same lookup on surface forms; unknown words map to the model's OOV entry.
  double logprob_words(std::span<const std::string> history, const std::string& word) const;

  // Natural-log probability of every predicted token of an encoded sentence.
  std::vector<double> sentence_logprobs(std::span<const WordId> sentence) const;

 private:
  using Key = std::string;
  static void append_id(Key& key, int id);
  int local_id(const std::string& word) const;
  int intern(const std::string& word);
  double log10_local(const int* history, std::size_t len, int word) const;

  std::vector<std::vector<Entry>> sections_;
  std::vector<std::unordered_map<Key, std::size_t>> index_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_ids_;
  std::vector<int> vocab_map_;  // vocabulary id -> local id, or -1
  int oov_local_ = -1;
};

// Interpolated Kneser-Ney with one fixed discount at every order.
ArpaModel train_kn(const TokenizedCorpus& corpus, const Vocabulary& vocab, int order,
                   double discount = 0.75);

void write_arpa(const ArpaModel& model, std::ostream& out);
void save_arpa(const ArpaModel& model, const std::filesystem::path& path);
ArpaModel read_arpa(std::istream& in, const std::string& source = "<stream>");
ArpaModel load_arpa(const std::filesystem::path& path);

}  // namespace surnn
