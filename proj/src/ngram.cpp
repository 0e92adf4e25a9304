#include "surnn/ngram.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "surnn/error.hpp"
#include "surnn/format.hpp"

namespace surnn {

namespace {

constexpr double kLn10 = 2.302585092994045684;

using Gram = std::vector<WordId>;

}  // namespace

ArpaModel::ArpaModel(int order) {
  if (order < 1) throw UsageError("n-gram order must be at least 1");
  sections_.resize(static_cast<std::size_t>(order));
  index_.resize(static_cast<std::size_t>(order));
}

void ArpaModel::append_id(Key& key, int id) {
  key.append(reinterpret_cast<const char*>(&id), sizeof id);
}

int ArpaModel::local_id(const std::string& word) const {
  auto it = word_ids_.find(word);
  return it == word_ids_.end() ? -1 : it->second;
}

int ArpaModel::intern(const std::string& word) {
  auto [it, inserted] = word_ids_.emplace(word, static_cast<int>(words_.size()));
  if (inserted) {
    words_.push_back(word);
    if (word == kOovToken || (oov_local_ < 0 && word == "<unk>")) oov_local_ = it->second;
  }
  return it->second;
}

void ArpaModel::add(Entry entry) {
  const std::size_t m = entry.words.size();
  if (m == 0 || m > sections_.size()) {
    throw UsageError("n-gram of length " + std::to_string(m) + " in an order-" +
                     std::to_string(order()) + " model");
  }
  Key key;
  for (const auto& w : entry.words) append_id(key, intern(w));
  auto& idx = index_[m - 1];
  if (idx.count(key)) {
    std::string text;
    for (const auto& w : entry.words) text += (text.empty() ? "" : " ") + w;
    throw FormatError("duplicate " + std::to_string(m) + "-gram '" + text + "'");
  }
  idx.emplace(std::move(key), sections_[m - 1].size());
  sections_[m - 1].push_back(std::move(entry));
}

void ArpaModel::bind(const Vocabulary& vocab) {
  vocab_map_.assign(vocab.size(), -1);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    vocab_map_[i] = local_id(vocab.words()[i]);
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab_map_[i] < 0 && !is_special_token(vocab.words()[i])) vocab_map_[i] = oov_local_;
  }
  const auto oov = static_cast<std::size_t>(vocab.oov());
  if (vocab_map_[oov] < 0) vocab_map_[oov] = oov_local_;
}

double ArpaModel::log10_local(const int* history, std::size_t len, int word) const {
  if (word < 0) return kLog10Floor;
  const std::size_t max_hist = sections_.size() - 1;
  if (len > max_hist) {
    history += len - max_hist;
    len = max_hist;
  }
  double bow = 0.0;
  for (std::size_t start = 0; start <= len; ++start) {
    const std::size_t hlen = len - start;
    Key key;
    for (std::size_t i = start; i < len; ++i) append_id(key, history[i]);
    const Key ctx = key;
    append_id(key, word);
    const auto& idx = index_[hlen];
    if (auto it = idx.find(key); it != idx.end()) return bow + sections_[hlen][it->second].prob10;
    if (hlen > 0) {
      const auto& cidx = index_[hlen - 1];
      if (auto c = cidx.find(ctx); c != cidx.end()) {
        const Entry& e = sections_[hlen - 1][c->second];
        if (e.has_bow) bow += e.bow10;
      }
    }
  }
  return kLog10Floor;
}

double ArpaModel::logprob(std::span<const WordId> history, WordId word) const {
  if (!bound()) throw UsageError("n-gram model used before bind()");
  auto map = [&](WordId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_map_.size()) {
      throw UsageError("word id " + std::to_string(id) + " outside the bound vocabulary");
    }
    return vocab_map_[static_cast<std::size_t>(id)];
  };
  int hist[16];
  const std::size_t keep = std::min(history.size(), std::min<std::size_t>(sections_.size() - 1, 16));
  const std::size_t off = history.size() - keep;
  for (std::size_t i = 0; i < keep; ++i) hist[i] = map(history[off + i]);
  return log10_local(hist, keep, map(word)) * kLn10;
}

double ArpaModel::prob(std::span<const WordId> history, WordId word) const {
  return std::exp(logprob(history, word));
}

double ArpaModel::logprob_words(std::span<const std::string> history,
                                const std::string& word) const {
  auto map = [&](const std::string& w) {
    const int id = local_id(w);
    return id < 0 ? oov_local_ : id;
  };
  std::vector<int> hist;
  for (const auto& w : history) hist.push_back(map(w));
  return log10_local(hist.data(), hist.size(), map(word)) * kLn10;
}

std::vector<double> ArpaModel::sentence_logprobs(std::span<const WordId> sentence) const {
  std::vector<double> out;
  const std::size_t h = sections_.size() - 1;
  for (std::size_t t = 1; t < sentence.size(); ++t) {
    const std::size_t from = t > h ? t - h : 0;
    out.push_back(logprob(sentence.subspan(from, t - from), sentence[t]));
  }
  return out;
}

ArpaModel train_kn(const TokenizedCorpus& corpus, const Vocabulary& vocab, int order,
                   double discount) {
  if (order < 1) throw UsageError("n-gram order must be at least 1");
  if (!(discount > 0.0 && discount < 1.0)) throw UsageError("discount must lie in (0, 1)");
  if (corpus.sentences.empty()) throw FormatError("empty corpus");
  const auto n = static_cast<std::size_t>(order);
  const WordId bos = vocab.sent_begin();

  // raw[m-1]: occurrence counts of m-grams ending at a predicted position.
  std::vector<std::map<Gram, double>> raw(n);
  for (const auto& s : corpus.sentences) {
    for (std::size_t t = 1; t < s.size(); ++t) {
      for (std::size_t m = 1; m <= n && m <= t + 1; ++m) {
        raw[m - 1][Gram(s.begin() + static_cast<std::ptrdiff_t>(t + 1 - m),
                        s.begin() + static_cast<std::ptrdiff_t>(t + 1))] += 1.0;
      }
    }
  }
  // Lower orders use continuation counts, except n-grams opening with <s>.
  std::vector<std::map<Gram, double>> counts(n);
  counts[n - 1] = raw[n - 1];
  for (std::size_t m = 1; m < n; ++m) {
    auto& c = counts[m - 1];
    for (const auto& [g, v] : raw[m - 1]) {
      if (g.front() == bos) c[g] = v;
    }
    for (const auto& [g, v] : raw[m]) {
      if (Gram(g.begin() + 1, g.end()).front() == bos) continue;
      c[Gram(g.begin() + 1, g.end())] += 1.0;
    }
  }

  std::vector<WordId> predictable;
  for (std::size_t i = 0; i < vocab.num_regular(); ++i) predictable.push_back(static_cast<WordId>(i));
  predictable.push_back(vocab.sent_end());
  predictable.push_back(vocab.oov());
  for (auto w : predictable) {
    auto& c = counts[0][Gram{w}];
    if (w == vocab.oov() && c < 1.0) c = 1.0;
  }

  struct Context {
    double total = 0.0;
    double types = 0.0;
  };
  std::vector<std::map<Gram, Context>> ctx(n);
  for (std::size_t m = 1; m <= n; ++m) {
    for (const auto& [g, v] : counts[m - 1]) {
      if (v <= 0.0) continue;
      auto& c = ctx[m - 1][Gram(g.begin(), g.end() - 1)];
      c.total += v;
      c.types += 1.0;
    }
  }

  // Interpolated probabilities, order by order.
  const double uniform = 1.0 / static_cast<double>(predictable.size());
  std::vector<std::map<Gram, double>> prob(n);
  {
    const Context& c0 = ctx[0][Gram{}];
    for (auto w : predictable) {
      const double v = counts[0][Gram{w}];
      prob[0][Gram{w}] = std::max(v - discount, 0.0) / c0.total +
                         discount * c0.types / c0.total * uniform;
    }
  }
  // Back-off mass for an unseen continuation of context h at order m.
  auto lower_prob = [&](const Gram& g) {
    // Recursive back-off through orders already computed.
    Gram h(g.begin(), g.end() - 1);
    const WordId w = g.back();
    double scale = 1.0;
    while (true) {
      Gram probe = h;
      probe.push_back(w);
      auto& table = prob[probe.size() - 1];
      if (auto it = table.find(probe); it != table.end()) return scale * it->second;
      if (h.empty()) return 0.0;
      if (auto c = ctx[h.size()].find(h); c != ctx[h.size()].end()) {
        scale *= discount * c->second.types / c->second.total;
      }
      h.erase(h.begin());
    }
  };
  for (std::size_t m = 2; m <= n; ++m) {
    for (const auto& [g, v] : counts[m - 1]) {
      if (v <= 0.0) continue;
      const Context& c = ctx[m - 1].at(Gram(g.begin(), g.end() - 1));
      const double backoff = lower_prob(Gram(g.begin() + 1, g.end()));
      prob[m - 1][g] = std::max(v - discount, 0.0) / c.total +
                       discount * c.types / c.total * backoff;
    }
  }

  ArpaModel model(order);
  auto make_entry = [&](const Gram& g, double p) {
    ArpaModel::Entry e;
    for (auto id : g) e.words.push_back(vocab.word(id));
    e.prob10 = std::log10(p);
    if (g.size() < n) {
      if (auto c = ctx[g.size()].find(g); c != ctx[g.size()].end()) {
        e.has_bow = true;
        e.bow10 = std::log10(discount * c->second.types / c->second.total);
      }
    }
    return e;
  };
  // Unigrams in vocabulary order, with <s> carrying only a back-off weight.
  std::vector<Gram> unigrams;
  for (std::size_t i = 0; i < vocab.num_regular(); ++i) unigrams.push_back({static_cast<WordId>(i)});
  unigrams.push_back({vocab.sent_begin()});
  unigrams.push_back({vocab.sent_end()});
  unigrams.push_back({vocab.oov()});
  for (const auto& g : unigrams) {
    if (g[0] == bos) {
      auto e = make_entry(g, 1.0);
      e.prob10 = ArpaModel::kLog10Floor;
      model.add(std::move(e));
    } else {
      model.add(make_entry(g, prob[0].at(g)));
    }
  }
  for (std::size_t m = 2; m <= n; ++m) {
    for (const auto& [g, p] : prob[m - 1]) model.add(make_entry(g, p));
  }
  model.bind(vocab);
  return model;
}

void write_arpa(const ArpaModel& model, std::ostream& out) {
  out << "\\data\\\n";
  for (int m = 1; m <= model.order(); ++m) {
    out << "ngram " << m << '=' << model.entries(m).size() << '\n';
  }
  std::string line;
  for (int m = 1; m <= model.order(); ++m) {
    out << "\n\\" << m << "-grams:\n";
    for (const auto& e : model.entries(m)) {
      line = format_double(e.prob10);
      line += '\t';
      for (std::size_t i = 0; i < e.words.size(); ++i) {
        if (i) line += ' ';
        line += e.words[i];
      }
      if (e.has_bow) {
        line += '\t';
        line += format_double(e.bow10);
      }
      out << line << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void save_arpa(const ArpaModel& model, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_arpa(model, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write ARPA file", path.string());
  out << buf.str();
}

namespace {

bool parse_number(const std::string& tok, double& v) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && p == e;
}

bool parse_section_header(const std::string& line, int& m) {
  // "\N-grams:"
  if (line.size() < 9 || line.front() != '\\') return false;
  const auto dash = line.find("-grams:");
  if (dash == std::string::npos || dash + 7 != line.size()) return false;
  const std::string num = line.substr(1, dash - 1);
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), m);
  return ec == std::errc() && p == num.data() + num.size() && m >= 1;
}

}  // namespace

ArpaModel read_arpa(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  auto where = [&](std::size_t i) { return source + ":" + std::to_string(i + 1); };
  auto trimmed = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  };

  std::size_t i = 0;
  while (i < lines.size() && trimmed(lines[i]) != "\\data\\") ++i;
  if (i == lines.size()) throw FormatError("missing \\data\\ section", source);
  ++i;

  std::vector<std::size_t> declared;
  for (; i < lines.size(); ++i) {
    const std::string t = trimmed(lines[i]);
    if (t.empty()) continue;
    if (t.rfind("ngram ", 0) != 0) break;
    const auto eq = t.find('=');
    int m = 0;
    long long c = -1;
    const std::string ms = trimmed(t.substr(6, eq == std::string::npos ? 0 : eq - 6));
    const std::string cs = eq == std::string::npos ? "" : trimmed(t.substr(eq + 1));
    auto r1 = std::from_chars(ms.data(), ms.data() + ms.size(), m);
    auto r2 = std::from_chars(cs.data(), cs.data() + cs.size(), c);
    if (eq == std::string::npos || r1.ec != std::errc() || r2.ec != std::errc() ||
        r1.ptr != ms.data() + ms.size() || r2.ptr != cs.data() + cs.size() || c < 0) {
      throw FormatError("malformed count line '" + t + "'", where(i));
    }
    if (m != static_cast<int>(declared.size()) + 1) {
      throw FormatError("ngram counts must be listed for orders 1, 2, ... in sequence", where(i));
    }
    declared.push_back(static_cast<std::size_t>(c));
  }
  if (declared.empty()) throw FormatError("\\data\\ section declares no n-gram counts", source);

  ArpaModel model(static_cast<int>(declared.size()));
  for (int expect = 1; expect <= model.order(); ++expect) {
    while (i < lines.size() && trimmed(lines[i]).empty()) ++i;
    if (i == lines.size()) {
      throw FormatError("missing \\" + std::to_string(expect) + "-grams: section", source);
    }
    int m = 0;
    if (!parse_section_header(trimmed(lines[i]), m) || m != expect) {
      throw FormatError("expected section header \\" + std::to_string(expect) + "-grams:, found '" +
                            trimmed(lines[i]) + "'",
                        where(i));
    }
    const std::size_t header_line = i;
    ++i;
    std::size_t found = 0;
    for (; i < lines.size(); ++i) {
      const std::string t = trimmed(lines[i]);
      if (t.empty()) continue;
      if (t.front() == '\\') break;
      auto toks = split_words(t);
      const auto um = static_cast<std::size_t>(m);
      if (toks.size() != um + 1 && toks.size() != um + 2) {
        throw FormatError(std::to_string(m) + "-gram entry has " + std::to_string(toks.size()) +
                              " fields",
                          where(i));
      }
      ArpaModel::Entry e;
      if (!parse_number(toks[0], e.prob10)) {
        throw FormatError("bad log-probability '" + toks[0] + "'", where(i));
      }
      e.words.assign(toks.begin() + 1, toks.begin() + 1 + static_cast<std::ptrdiff_t>(um));
      if (toks.size() == um + 2) {
        if (m == model.order()) {
          throw FormatError("back-off weight on a highest-order n-gram", where(i));
        }
        if (!parse_number(toks.back(), e.bow10)) {
          throw FormatError("bad back-off weight '" + toks.back() + "'", where(i));
        }
        e.has_bow = true;
      }
      try {
        model.add(std::move(e));
      } catch (const FormatError& err) {
        throw FormatError(err.what(), where(i));
      }
      ++found;
    }
    if (found != declared[static_cast<std::size_t>(m - 1)]) {
      throw FormatError("order " + std::to_string(m) + ": \\data\\ declares " +
                            std::to_string(declared[static_cast<std::size_t>(m - 1)]) +
                            " entries but the section holds " + std::to_string(found),
                        where(header_line));
    }
  }
  while (i < lines.size() && trimmed(lines[i]).empty()) ++i;
  if (i == lines.size() || trimmed(lines[i]) != "\\end\\") {
    throw FormatError("missing \\end\\ marker", i < lines.size() ? where(i) : source);
  }
  return model;
}

ArpaModel load_arpa(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open ARPA file", path.string());
  return read_arpa(in, path.string());
}

}  // namespace surnn
