#include "surnn/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "surnn/corpus.hpp"
#include "surnn/error.hpp"

namespace surnn {

namespace {

std::string numbered(char prefix, std::size_t i) {
  std::ostringstream s;
  s << prefix << std::setw(2) << std::setfill('0') << i;
  return s.str();
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

double round4(double x) { return std::round(x * 1e4) / 1e4; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write file", path.string());
  out << text;
}

}  // namespace

ReversalLanguage::ReversalLanguage(const FixtureConfig& config) : cfg_(config) {
  if (cfg_.num_words < 5) throw UsageError("fixture language needs at least 5 words per half");
  for (int m = 2; m <= 4; ++m) openers_.push_back("o" + std::to_string(m));
  for (std::size_t i = 0; i < cfg_.num_words; ++i) {
    first_.push_back(numbered('a', i));
    second_.push_back(numbered('b', i));
  }
  // Fixed successor lists, derived from the seed so that different fixture
  // sets are different languages.
  std::mt19937_64 rng(cfg_.seed ^ 0x5eed5eedull);
  successors_.resize(cfg_.num_words);
  for (std::size_t i = 0; i < cfg_.num_words; ++i) {
    std::vector<std::size_t> all(cfg_.num_words);
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    std::shuffle(all.begin(), all.end(), rng);
    successors_[i].assign(all.begin(), all.begin() + 4);
  }
}

std::vector<std::string> ReversalLanguage::sample(std::mt19937_64& rng) const {
  std::uniform_int_distribution<int> len(2, 4);
  std::uniform_int_distribution<std::size_t> any(0, cfg_.num_words - 1);
  std::uniform_int_distribution<std::size_t> succ(0, 3);
  std::bernoulli_distribution stay(cfg_.successor_prob), mirror(cfg_.mirror_prob);

  const int m = len(rng);
  std::vector<std::size_t> a(static_cast<std::size_t>(m));
  a[0] = any(rng);
  for (std::size_t i = 1; i < a.size(); ++i) {
    // The successor slot is picked by the word two back, which makes the
    // chain second order.
    const std::size_t slot = i >= 2 ? a[i - 2] % 4 : succ(rng);
    a[i] = stay(rng) ? successors_[a[i - 1]][slot] : any(rng);
  }
  std::vector<std::string> words = {openers_[static_cast<std::size_t>(m - 2)]};
  for (auto i : a) words.push_back(first_[i]);
  // The innermost pair is adjacent and gets its own, usually weaker, link.
  std::bernoulli_distribution inner(cfg_.inner_mirror_prob);
  for (auto it = a.rbegin(); it != a.rend(); ++it) {
    const bool echo = it == a.rbegin() ? inner(rng) : mirror(rng);
    words.push_back(second_[echo ? *it : any(rng)]);
  }
  return words;
}

const std::vector<std::string>& ReversalLanguage::competitors(const std::string& word) const {
  if (!word.empty() && word[0] == 'a') return first_;
  if (!word.empty() && word[0] == 'b') return second_;
  return openers_;
}

Lattice bigram_lattice(const std::vector<Slot>& slots, const ArpaModel& bigram,
                       double slot_seconds, const std::string& utterance) {
  if (slots.empty()) throw UsageError("confusion network has no slots");
  Lattice lat;
  lat.utterance = utterance;
  lat.nodes.push_back({0.0});
  // Node ids of the previous slot's candidates with their words.
  std::vector<std::pair<std::size_t, std::string>> prev = {{0, std::string(kSentBeginToken)}};
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& slot = slots[i];
    if (slot.words.empty() || slot.words.size() != slot.acoustic.size()) {
      throw UsageError("malformed confusion slot");
    }
    std::vector<std::pair<std::size_t, std::string>> cur;
    for (std::size_t j = 0; j < slot.words.size(); ++j) {
      const std::size_t node = lat.nodes.size();
      lat.nodes.push_back({round4(slot_seconds * static_cast<double>(i + 1))});
      for (const auto& [from, word] : prev) {
        const std::string hist[] = {word};
        LatticeArc arc;
        arc.start = from;
        arc.end = node;
        arc.word = slot.words[j];
        arc.acoustic = slot.acoustic[j];
        arc.lm = bigram.logprob_words(hist, slot.words[j]);
        lat.arcs.push_back(std::move(arc));
      }
      cur.emplace_back(node, slot.words[j]);
    }
    prev = std::move(cur);
  }
  const std::size_t fin = lat.nodes.size();
  lat.nodes.push_back({lat.nodes.back().time});
  for (const auto& [from, word] : prev) {
    const std::string hist[] = {word};
    LatticeArc arc;
    arc.start = from;
    arc.end = fin;
    arc.word = kNullWord;
    arc.lm = bigram.logprob_words(hist, std::string(kSentEndToken));
    lat.arcs.push_back(std::move(arc));
  }
  lat.validate();
  return lat;
}

FixtureSet make_fixtures(const FixtureConfig& cfg) {
  if (cfg.max_alternatives < 1) throw UsageError("max_alternatives must be at least 1");
  if (!(cfg.acoustic_noise >= 0.0)) throw UsageError("acoustic noise must be non-negative");
  ReversalLanguage lang(cfg);
  std::mt19937_64 rng(cfg.seed);
  FixtureSet set;

  std::size_t tokens = 0;
  while (tokens < cfg.train_tokens) {
    auto s = lang.sample(rng);
    tokens += s.size() + 1;
    set.train.push_back(join(s));
  }
  for (std::size_t i = 0; i < cfg.heldout_sentences; ++i) set.heldout.push_back(join(lang.sample(rng)));

  const Vocabulary vocab = Vocabulary::build(set.train, kAllWords);
  set.bigram = train_kn(TokenizedCorpus::from_lines(vocab, set.train), vocab, 2);

  std::normal_distribution<double> noise(0.0, cfg.acoustic_noise);
  std::uniform_int_distribution<int> alts(1, cfg.max_alternatives);
  auto make_utts = [&](const char* prefix, std::size_t count) {
    std::vector<Utterance> utts;
    for (std::size_t u = 0; u < count; ++u) {
      Utterance utt;
      std::ostringstream id;
      id << prefix << '-' << std::setw(4) << std::setfill('0') << u;
      utt.id = id.str();
      utt.reference = lang.sample(rng);
      std::vector<Slot> slots;
      for (const auto& w : utt.reference) {
        std::vector<std::string> pool;
        for (const auto& c : lang.competitors(w)) {
          if (c != w) pool.push_back(c);
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(alts(rng)), pool.size() + 1);
        std::vector<std::string> cands = {w};
        cands.insert(cands.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n - 1));
        std::shuffle(cands.begin(), cands.end(), rng);
        Slot slot;
        for (const auto& c : cands) {
          slot.words.push_back(c);
          slot.acoustic.push_back(round4(noise(rng) + (c == w ? cfg.acoustic_bonus : 0.0)));
        }
        slots.push_back(std::move(slot));
      }
      utt.lattice = bigram_lattice(slots, set.bigram, cfg.slot_seconds, utt.id);
      utts.push_back(std::move(utt));
    }
    return utts;
  };
  set.dev = make_utts("dev", cfg.dev_utterances);
  set.test = make_utts("test", cfg.test_utterances);
  return set;
}

void write_fixtures(const FixtureSet& set, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "lattices" / "dev");
  fs::create_directories(dir / "lattices" / "test");
  auto lines = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& l : v) out += l + '\n';
    return out;
  };
  write_text(dir / "train.txt", lines(set.train));
  write_text(dir / "heldout.txt", lines(set.heldout));
  {
    std::ostringstream arpa;
    write_arpa(set.bigram, arpa);
    write_text(dir / "bigram.arpa", arpa.str());
  }
  auto write_part = [&](const std::vector<Utterance>& utts, const char* name) {
    std::string refs;
    for (const auto& u : utts) {
      refs += u.id + ' ' + join(u.reference) + '\n';
      std::ostringstream slf;
      write_slf(u.lattice, slf);
      write_text(dir / "lattices" / name / (u.id + ".slf"), slf.str());
    }
    write_text(dir / (std::string(name) + ".ref"), refs);
  };
  write_part(set.dev, "dev");
  write_part(set.test, "test");
}

std::vector<std::pair<std::string, std::vector<std::string>>> read_references(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open reference file", path.string());
  std::vector<std::pair<std::string, std::vector<std::string>>> refs;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    auto words = split_words(line);
    if (words.empty()) continue;
    if (words.size() < 2) {
      throw FormatError("reference line has an id but no words",
                        path.string() + ":" + std::to_string(lineno));
    }
    std::string id = words.front();
    words.erase(words.begin());
    refs.emplace_back(std::move(id), std::move(words));
  }
  return refs;
}

Lattice example_lattice() {
  Lattice lat;
  lat.utterance = "example";
  for (double t : {0.0, 0.2, 0.25, 0.5, 0.8, 1.1}) lat.nodes.push_back({t});
  auto arc = [&](std::size_t s, std::size_t e, const char* w, double ac, double lm) {
    lat.arcs.push_back({s, e, w, ac, lm});
  };
  arc(0, 1, "w0", -1.0, -0.5);
  arc(0, 2, "w1", -1.5, -0.7);
  arc(1, 3, "w2", -1.2, -0.4);
  arc(2, 3, "w2", -1.1, -0.6);
  arc(3, 4, "w3", -0.9, -0.3);
  arc(4, 5, "w4", -1.4, -0.8);
  arc(4, 5, "w5", -1.3, -0.9);
  lat.validate();
  return lat;
}

}  // namespace surnn
