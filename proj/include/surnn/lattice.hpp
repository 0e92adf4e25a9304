#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace surnn {

// Word label of an epsilon arc.
inline constexpr const char* kNullWord = "!NULL";

struct LatticeNode {
  double time = 0.0;
};

struct LatticeArc {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string word;
  double acoustic = 0.0;  // natural log
  double lm = 0.0;        // natural log
};

struct Lattice {
  std::string utterance;
  std::vector<LatticeNode> nodes;
  std::vector<LatticeArc> arcs;

  // Throws FormatError unless the lattice is a DAG with exactly one node
  // without predecessors, one node without successors, and times that do
  // not decrease along arcs.
  void validate() const;
  std::size_t initial() const;
  std::size_t final() const;
  // Kahn's order, lowest node id first among ready nodes.
  std::vector<std::size_t> topological_order() const;
  std::vector<std::vector<std::size_t>> outgoing() const;
  std::vector<std::vector<std::size_t>> incoming() const;
};

// SLF subset: VERSION, UTTERANCE, N/L counts, I= t= node lines and
// J= S= E= W= a= l= arc lines. See docs/formats.md.
Lattice read_slf(std::istream& in, const std::string& source = "<stream>");
Lattice load_slf(const std::filesystem::path& path);
void write_slf(const Lattice& lattice, std::ostream& out);
void save_slf(const Lattice& lattice, const std::filesystem::path& path);

struct Scales {
  double acoustic = 1.0;
  double lm = 1.0;
  double arc(const LatticeArc& a) const { return acoustic * a.acoustic + lm * a.lm; }
};

struct Hypothesis {
  std::vector<std::string> words;
  double acoustic = 0.0;
  double lm = 0.0;
  double total = 0.0;  // scaled
};

using NBestList = std::vector<Hypothesis>;

// Top-n distinct word sequences by scaled score (A* search with an exact
// backward Viterbi heuristic).
NBestList nbest(const Lattice& lattice, std::size_t n, const Scales& scales);
// Viterbi path; among equal scores the lowest arc id wins.
Hypothesis best_path(const Lattice& lattice, const Scales& scales);
// Arc posterior probabilities by forward-backward in log space.
std::vector<double> posteriors(const Lattice& lattice, const Scales& scales);
// Removes arcs whose log posterior is below -beam, except arcs on the best
// path, then drops nodes no longer on a complete path.
Lattice prune(const Lattice& lattice, double beam, const Scales& scales);

// N-best text format: "total acoustic lm word1 word2 ..." per line.
void write_nbest(const NBestList& list, std::ostream& out);
NBestList read_nbest(std::istream& in, const std::string& source = "<stream>");

}  // namespace surnn
