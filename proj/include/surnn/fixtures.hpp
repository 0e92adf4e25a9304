#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "surnn/lattice.hpp"
#include "surnn/ngram.hpp"

namespace surnn {

// Generator settings for the desk-scale evaluation set.
struct FixtureConfig {
  std::uint64_t seed = 1;
  std::size_t train_tokens = 50000;  // predicted tokens, </s> included
  std::size_t heldout_sentences = 500;
  std::size_t dev_utterances = 50;
  std::size_t test_utterances = 1000;
  std::size_t num_words = 30;      // size of each half's word set
  double successor_prob = 0.5;     // first half: stay on the Markov successor list
  double mirror_prob = 0.8;        // second half: echo the partner word
  double inner_mirror_prob = 0.25;  // same for b_m, right after a_m
  // Acoustic model: the correct word gets `acoustic_bonus` on top of
  // N(0, acoustic_noise) scores shared with its competitors.
  double acoustic_bonus = 0.6;
  double acoustic_noise = 0.8;
  int max_alternatives = 3;
  double slot_seconds = 0.3;
};

// Sentences "o<m> a_1 .. a_m b_m .. b_1": the a words follow a sparse
// second-order Markov chain and every b_i echoes the partner of a_i with probability
// mirror_prob, so each word depends on context at distance up to 2m-1 in
// both directions.
class ReversalLanguage {
 public:
  explicit ReversalLanguage(const FixtureConfig& config);

  std::vector<std::string> sample(std::mt19937_64& rng) const;
  // Words that may occupy the same position as `word` (acoustic confusers).
  const std::vector<std::string>& competitors(const std::string& word) const;

 private:
  FixtureConfig cfg_;
  std::vector<std::string> openers_, first_, second_;
  std::vector<std::vector<std::size_t>> successors_;
};

struct Utterance {
  std::string id;
  std::vector<std::string> reference;
  Lattice lattice;
};

struct FixtureSet {
  std::vector<std::string> train;
  std::vector<std::string> heldout;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
  ArpaModel bigram;  // trained on `train`, supplies the lattice lm scores
};

// One slot of a confusion network: candidate words with acoustic scores.
struct Slot {
  std::vector<std::string> words;
  std::vector<double> acoustic;
};

// Expands a confusion network into the lattice a bigram decoder would
// produce: one node per (slot, candidate), lm scores from `bigram`, and
// !NULL arcs carrying the sentence-end probability into the final node.
Lattice bigram_lattice(const std::vector<Slot>& slots, const ArpaModel& bigram,
                       double slot_seconds, const std::string& utterance);

FixtureSet make_fixtures(const FixtureConfig& config);

// Writes train.txt, heldout.txt, bigram.arpa, {dev,test}.ref and the
// lattices under lattices/{dev,test}/<id>.slf.
void write_fixtures(const FixtureSet& set, const std::filesystem::path& dir);

// Reference transcripts: "<id> word word ..." per line.
std::vector<std::pair<std::string, std::vector<std::string>>> read_references(
    const std::filesystem::path& path);

// Six-node lattice: w0 and w1 both lead into w2 (whose end node then has
// two 3-gram histories), followed by w3 and the alternatives w4 and w5 into
// the final node.
Lattice example_lattice();

}  // namespace surnn
