#pragma once

#include <random>
#include <string>
#include <vector>

#include "surnn/corpus.hpp"
#include "surnn/interpolate.hpp"
#include "surnn/lattice.hpp"
#include "surnn/models.hpp"
#include "surnn/ngram.hpp"
#include "surnn/rescore.hpp"

namespace surnn::testing {

// Every initial-to-final path as a list of arc ids.
std::vector<std::vector<std::size_t>> enumerate_paths(const Lattice& lat);

// Words on a path with epsilon arcs (!NULL, <s>) dropped; a trailing </s>
// arc is dropped too since every sentence ends with one.
std::vector<std::string> path_words(const Lattice& lat, const std::vector<std::size_t>& path);

// Random DAG whose nodes are in time order. At most `max_paths` complete
// paths; roughly one arc in eight is !NULL and the last arc into the final
// node is sometimes </s>.
Lattice random_lattice(std::mt19937_64& rng, const std::vector<std::string>& words,
                       std::size_t max_paths);

// Sum of two-stage log scores of a sentence, computed position by position
// through the single-step model APIs and a naive n-gram back-off recursion.
double oracle_sentence_lm(const LmSet& lms, const std::vector<std::string>& words,
                          const InterpConfig& interp, SmoothingConfig smoothing);

// Naive ARPA back-off written directly over the model's entry lists: natural
// log P(word | history) with the history truncated to order-1 words.
double naive_backoff(const ArpaModel& model, std::vector<std::string> history,
                     const std::string& word);

// Scaled total scores of every path of a rescored or input lattice.
std::vector<double> path_totals(const Lattice& lat, const Scales& scales);

// Small vocabulary and text used across tests.
std::vector<std::string> toy_lines(std::mt19937_64& rng, std::size_t sentences,
                                   std::size_t words);

}  // namespace surnn::testing
