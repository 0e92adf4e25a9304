#include "surnn/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "surnn/corpus.hpp"
#include "surnn/error.hpp"
#include "surnn/format.hpp"

namespace surnn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

bool to_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && p == e;
}

bool to_size(const std::string& s, std::size_t& v) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

std::vector<std::string> path_words(const Lattice& lat, const std::vector<std::size_t>& arcs) {
  std::vector<std::string> words;
  for (auto a : arcs) {
    const auto& w = lat.arcs[a].word;
    if (w != kNullWord && w != kSentBeginToken && w != kSentEndToken) words.push_back(w);
  }
  return words;
}

// Best scaled score from every node to the final node.
std::vector<double> backward_viterbi(const Lattice& lat, const Scales& sc,
                                     const std::vector<std::size_t>& order) {
  const auto out = lat.outgoing();
  std::vector<double> best(lat.nodes.size(), kNegInf);
  best[lat.final()] = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (auto a : out[*it]) {
      best[*it] = std::max(best[*it], sc.arc(lat.arcs[a]) + best[lat.arcs[a].end]);
    }
  }
  return best;
}

}  // namespace

std::vector<std::vector<std::size_t>> Lattice::outgoing() const {
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) out[arcs[a].start].push_back(a);
  return out;
}

std::vector<std::vector<std::size_t>> Lattice::incoming() const {
  std::vector<std::vector<std::size_t>> in(nodes.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) in[arcs[a].end].push_back(a);
  return in;
}

std::vector<std::size_t> Lattice::topological_order() const {
  std::vector<std::size_t> indeg(nodes.size(), 0);
  for (const auto& a : arcs) ++indeg[a.end];
  const auto out = outgoing();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (indeg[v] == 0) ready.push(v);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const auto u = ready.top();
    ready.pop();
    order.push_back(u);
    for (auto a : out[u]) {
      if (--indeg[arcs[a].end] == 0) ready.push(arcs[a].end);
    }
  }
  return order;
}

std::size_t Lattice::initial() const {
  std::vector<bool> has_in(nodes.size(), false);
  for (const auto& a : arcs) has_in[a.end] = true;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (!has_in[v]) return v;
  }
  throw FormatError("lattice has no initial node", utterance);
}

std::size_t Lattice::final() const {
  std::vector<bool> has_out(nodes.size(), false);
  for (const auto& a : arcs) has_out[a.start] = true;
  for (std::size_t v = nodes.size(); v-- > 0;) {
    if (!has_out[v]) return v;
  }
  throw FormatError("lattice has no final node", utterance);
}

void Lattice::validate() const {
  const std::string where = utterance.empty() ? "lattice" : utterance;
  if (nodes.empty()) throw FormatError("lattice has no nodes", where);
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    if (arcs[a].start >= nodes.size() || arcs[a].end >= nodes.size()) {
      throw FormatError("arc J=" + std::to_string(a) + " refers to a missing node", where);
    }
  }
  std::vector<int> in(nodes.size(), 0), out(nodes.size(), 0);
  for (const auto& a : arcs) {
    ++out[a.start];
    ++in[a.end];
  }
  std::size_t initials = 0, finals = 0;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    initials += in[v] == 0;
    finals += out[v] == 0;
  }
  if (initials != 1) {
    throw FormatError("lattice has " + std::to_string(initials) + " initial nodes, expected 1", where);
  }
  if (finals != 1) {
    throw FormatError("lattice has " + std::to_string(finals) + " final nodes, expected 1", where);
  }
  if (topological_order().size() != nodes.size()) throw FormatError("cycle detected", where);
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    if (nodes[arcs[a].end].time < nodes[arcs[a].start].time) {
      throw FormatError("arc J=" + std::to_string(a) + " goes backwards in time", where);
    }
  }
}

Lattice read_slf(std::istream& in, const std::string& source) {
  Lattice lat;
  std::size_t num_nodes = 0, num_arcs = 0;
  bool have_counts = false;
  std::vector<bool> node_seen, arc_seen;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(what, source + ":" + std::to_string(lineno));
  };

  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_words(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    std::vector<std::pair<std::string, std::string>> fields;
    for (const auto& t : toks) {
      const auto eq = t.find('=');
      if (eq == std::string::npos || eq == 0) throw fail("expected key=value, got '" + t + "'");
      fields.emplace_back(t.substr(0, eq), t.substr(eq + 1));
    }
    auto get = [&](const char* key) -> const std::string* {
      for (const auto& [k, v] : fields) {
        if (k == key) return &v;
      }
      return nullptr;
    };
    auto need_size = [&](const char* key) {
      const std::string* v = get(key);
      std::size_t out = 0;
      if (!v || !to_size(*v, out)) throw fail(std::string("missing or invalid ") + key + "=");
      return out;
    };
    auto need_double = [&](const char* key, bool required) {
      const std::string* v = get(key);
      double out = 0.0;
      if (!v) {
        if (required) throw fail(std::string("missing ") + key + "=");
        return out;
      }
      if (!to_double(*v, out)) throw fail(std::string("invalid ") + key + "=" + *v);
      return out;
    };

    const std::string& kind = fields[0].first;
    if (kind == "VERSION") continue;
    if (kind == "UTTERANCE") {
      lat.utterance = fields[0].second;
      continue;
    }
    if (kind == "N") {
      if (have_counts) throw fail("repeated N=/L= line");
      num_nodes = need_size("N");
      num_arcs = need_size("L");
      lat.nodes.resize(num_nodes);
      lat.arcs.resize(num_arcs);
      node_seen.assign(num_nodes, false);
      arc_seen.assign(num_arcs, false);
      have_counts = true;
      continue;
    }
    if (kind == "I") {
      if (!have_counts) throw fail("node line before N=/L= header");
      const auto id = need_size("I");
      if (id >= num_nodes) throw fail("node I=" + std::to_string(id) + " out of range");
      if (node_seen[id]) throw fail("node I=" + std::to_string(id) + " defined twice");
      node_seen[id] = true;
      lat.nodes[id].time = need_double("t", true);
      continue;
    }
    if (kind == "J") {
      if (!have_counts) throw fail("arc line before N=/L= header");
      const auto id = need_size("J");
      if (id >= num_arcs) throw fail("arc J=" + std::to_string(id) + " out of range");
      if (arc_seen[id]) throw fail("arc J=" + std::to_string(id) + " defined twice");
      arc_seen[id] = true;
      LatticeArc& a = lat.arcs[id];
      a.start = need_size("S");
      a.end = need_size("E");
      if (a.start >= num_nodes || a.end >= num_nodes) {
        throw fail("arc J=" + std::to_string(id) + " refers to missing node " +
                   std::to_string(a.start >= num_nodes ? a.start : a.end));
      }
      const std::string* w = get("W");
      if (!w || w->empty()) throw fail("arc J=" + std::to_string(id) + " has no W= word");
      a.word = *w;
      a.acoustic = need_double("a", false);
      a.lm = need_double("l", false);
      continue;
    }
    // Other header fields (lmscale=, base=, ...) are outside the subset.
    if (have_counts) throw fail("unexpected field '" + kind + "'");
  }
  if (!have_counts) throw FormatError("missing N=/L= header", source);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (!node_seen[i]) throw FormatError("node I=" + std::to_string(i) + " never defined", source);
  }
  for (std::size_t i = 0; i < num_arcs; ++i) {
    if (!arc_seen[i]) throw FormatError("arc J=" + std::to_string(i) + " never defined", source);
  }
  try {
    lat.validate();
  } catch (const FormatError& e) {
    throw FormatError(e.what(), source);
  }
  return lat;
}

Lattice load_slf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open lattice file", path.string());
  return read_slf(in, path.string());
}

void write_slf(const Lattice& lat, std::ostream& out) {
  out << "VERSION=1.0\n";
  if (!lat.utterance.empty()) out << "UTTERANCE=" << lat.utterance << '\n';
  out << "N=" << lat.nodes.size() << "\tL=" << lat.arcs.size() << '\n';
  for (std::size_t i = 0; i < lat.nodes.size(); ++i) {
    out << "I=" << i << "\tt=" << format_double(lat.nodes[i].time) << '\n';
  }
  for (std::size_t j = 0; j < lat.arcs.size(); ++j) {
    const auto& a = lat.arcs[j];
    out << "J=" << j << "\tS=" << a.start << "\tE=" << a.end << "\tW=" << a.word
        << "\ta=" << format_double(a.acoustic) << "\tl=" << format_double(a.lm) << '\n';
  }
}

void save_slf(const Lattice& lat, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_slf(lat, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write lattice file", path.string());
  out << buf.str();
}

NBestList nbest(const Lattice& lat, std::size_t n, const Scales& sc) {
  if (n == 0) throw UsageError("n-best size must be at least 1");
  const auto order = lat.topological_order();
  const auto heur = backward_viterbi(lat, sc, order);
  const auto out = lat.outgoing();
  const std::size_t fin = lat.final();

  struct Partial {
    std::size_t arc;
    std::size_t parent;  // index into `partials`, or npos
  };
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  struct Item {
    double priority;
    std::size_t seq;
    std::size_t node;
    double g;
    std::size_t partial;
  };
  auto worse = [](const Item& a, const Item& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.seq > b.seq;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(worse)> queue(worse);
  std::vector<Partial> partials;
  std::size_t seq = 0;
  queue.push({heur[lat.initial()], seq++, lat.initial(), 0.0, npos});

  NBestList result;
  std::set<std::vector<std::string>> seen;
  while (!queue.empty() && result.size() < n) {
    const Item item = queue.top();
    queue.pop();
    if (item.node == fin) {
      std::vector<std::size_t> arcs;
      for (auto p = item.partial; p != npos; p = partials[p].parent) arcs.push_back(partials[p].arc);
      std::reverse(arcs.begin(), arcs.end());
      Hypothesis h;
      h.words = path_words(lat, arcs);
      if (!seen.insert(h.words).second) continue;
      for (auto a : arcs) {
        h.acoustic += lat.arcs[a].acoustic;
        h.lm += lat.arcs[a].lm;
      }
      h.total = item.g;
      result.push_back(std::move(h));
      continue;
    }
    for (auto a : out[item.node]) {
      const auto& arc = lat.arcs[a];
      if (heur[arc.end] == kNegInf) continue;
      partials.push_back({a, item.partial});
      const double g = item.g + sc.arc(arc);
      queue.push({g + heur[arc.end], seq++, arc.end, g, partials.size() - 1});
    }
  }
  return result;
}

Hypothesis best_path(const Lattice& lat, const Scales& sc) {
  const auto order = lat.topological_order();
  const auto out = lat.outgoing();
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<double> score(lat.nodes.size(), kNegInf);
  std::vector<std::size_t> back(lat.nodes.size(), none);
  score[lat.initial()] = 0.0;
  for (auto u : order) {
    if (score[u] == kNegInf) continue;
    for (auto a : out[u]) {
      const auto v = lat.arcs[a].end;
      const double cand = score[u] + sc.arc(lat.arcs[a]);
      if (cand > score[v] || (cand == score[v] && back[v] != none && a < back[v])) {
        score[v] = cand;
        back[v] = a;
      }
    }
  }
  std::vector<std::size_t> arcs;
  for (auto v = lat.final(); back[v] != none; v = lat.arcs[back[v]].start) arcs.push_back(back[v]);
  std::reverse(arcs.begin(), arcs.end());
  Hypothesis h;
  h.words = path_words(lat, arcs);
  for (auto a : arcs) {
    h.acoustic += lat.arcs[a].acoustic;
    h.lm += lat.arcs[a].lm;
  }
  h.total = score[lat.final()];
  return h;
}

std::vector<double> posteriors(const Lattice& lat, const Scales& sc) {
  const auto order = lat.topological_order();
  const auto out = lat.outgoing();
  std::vector<double> alpha(lat.nodes.size(), kNegInf), beta(lat.nodes.size(), kNegInf);
  alpha[lat.initial()] = 0.0;
  for (auto u : order) {
    for (auto a : out[u]) {
      alpha[lat.arcs[a].end] = log_add(alpha[lat.arcs[a].end], alpha[u] + sc.arc(lat.arcs[a]));
    }
  }
  beta[lat.final()] = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (auto a : out[*it]) {
      beta[*it] = log_add(beta[*it], sc.arc(lat.arcs[a]) + beta[lat.arcs[a].end]);
    }
  }
  const double total = alpha[lat.final()];
  if (!std::isfinite(total)) throw NumericError("lattice total score is not finite");
  std::vector<double> post(lat.arcs.size());
  for (std::size_t a = 0; a < lat.arcs.size(); ++a) {
    const auto& arc = lat.arcs[a];
    post[a] = std::exp(alpha[arc.start] + sc.arc(arc) + beta[arc.end] - total);
  }
  return post;
}

Lattice prune(const Lattice& lat, double beam, const Scales& sc) {
  if (!(beam >= 0.0)) throw UsageError("pruning beam must be non-negative");
  const auto post = posteriors(lat, sc);

  // Arcs of the Viterbi path always survive.
  std::vector<bool> keep(lat.arcs.size(), false);
  {
    const auto order = lat.topological_order();
    const auto out = lat.outgoing();
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<double> score(lat.nodes.size(), kNegInf);
    std::vector<std::size_t> back(lat.nodes.size(), none);
    score[lat.initial()] = 0.0;
    for (auto u : order) {
      for (auto a : out[u]) {
        const auto v = lat.arcs[a].end;
        const double cand = score[u] + sc.arc(lat.arcs[a]);
        if (cand > score[v] || (cand == score[v] && back[v] != none && a < back[v])) {
          score[v] = cand;
          back[v] = a;
        }
      }
    }
    for (auto v = lat.final(); back[v] != none; v = lat.arcs[back[v]].start) keep[back[v]] = true;
  }
  for (std::size_t a = 0; a < lat.arcs.size(); ++a) {
    if (std::log(post[a]) >= -beam - 1e-9) keep[a] = true;
  }

  // Nodes on a complete initial-to-final path over kept arcs.
  std::vector<bool> fwd(lat.nodes.size(), false), bwd(lat.nodes.size(), false);
  const auto order = lat.topological_order();
  fwd[lat.initial()] = true;
  for (auto u : order) {
    for (std::size_t a = 0; a < lat.arcs.size(); ++a) {
      if (keep[a] && lat.arcs[a].start == u && fwd[u]) fwd[lat.arcs[a].end] = true;
    }
  }
  bwd[lat.final()] = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (std::size_t a = 0; a < lat.arcs.size(); ++a) {
      if (keep[a] && lat.arcs[a].start == *it && bwd[lat.arcs[a].end]) bwd[*it] = true;
    }
  }
  Lattice outl;
  outl.utterance = lat.utterance;
  std::vector<std::size_t> remap(lat.nodes.size(), static_cast<std::size_t>(-1));
  for (std::size_t v = 0; v < lat.nodes.size(); ++v) {
    if (fwd[v] && bwd[v]) {
      remap[v] = outl.nodes.size();
      outl.nodes.push_back(lat.nodes[v]);
    }
  }
  for (std::size_t a = 0; a < lat.arcs.size(); ++a) {
    const auto& arc = lat.arcs[a];
    if (!keep[a] || !(fwd[arc.start] && bwd[arc.start]) || !(fwd[arc.end] && bwd[arc.end])) continue;
    LatticeArc c = arc;
    c.start = remap[arc.start];
    c.end = remap[arc.end];
    outl.arcs.push_back(std::move(c));
  }
  outl.validate();
  return outl;
}

void write_nbest(const NBestList& list, std::ostream& out) {
  for (const auto& h : list) {
    out << format_double(h.total) << ' ' << format_double(h.acoustic) << ' '
        << format_double(h.lm);
    for (const auto& w : h.words) out << ' ' << w;
    out << '\n';
  }
}

NBestList read_nbest(std::istream& in, const std::string& source) {
  NBestList list;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    auto toks = split_words(line);
    if (toks.empty()) continue;
    Hypothesis h;
    if (toks.size() < 3 || !to_double(toks[0], h.total) || !to_double(toks[1], h.acoustic) ||
        !to_double(toks[2], h.lm)) {
      throw FormatError("expected 'total acoustic lm words...'", source + ":" + std::to_string(lineno));
    }
    h.words.assign(toks.begin() + 3, toks.end());
    list.push_back(std::move(h));
  }
  return list;
}

}  // namespace surnn
