#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "surnn/corpus.hpp"
#include "surnn/error.hpp"

using namespace surnn;

namespace {

std::vector<std::string> lines_of_lengths(std::initializer_list<std::size_t> word_counts) {
  std::vector<std::string> lines;
  for (auto n : word_counts) {
    std::string line;
    for (std::size_t i = 0; i < n; ++i) line += (line.empty() ? "" : " ") + std::string("w");
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

TEST_CASE("vocabulary orders words by frequency") {
  std::vector<std::string> text = {"a b", "a"};
  auto v = Vocabulary::build(text, 2);
  CHECK(v.id("a") < v.id("b"));
  CHECK(v.num_regular() == 2);
  CHECK(v.size() == 8);
  CHECK(v.word(v.sent_begin()) == "<s>");
  CHECK(v.word(v.pad()) == "<pad>");
}

TEST_CASE("single word vocabulary: shortlist covers everything") {
  std::vector<std::string> text = {"x"};
  auto v = Vocabulary::build(text, 1);
  CHECK(v.in_shortlist(v.id("x")));
  const auto map = v.output_map();
  CHECK(map.row(v.id("x")) == 0);
  // Only <oov> shares the OOS node.
  CHECK(map.oos_members() == 1);
}

TEST_CASE("shortlist 5 of 10 sends the least frequent words to OOS") {
  // Word wi appears 11 - i times.
  std::vector<std::string> text;
  for (int i = 1; i <= 10; ++i) {
    for (int c = 0; c < 11 - i; ++c) text.push_back("w" + std::to_string(i));
  }
  auto v = Vocabulary::build(text, 5);
  const auto map = v.output_map();
  for (int i = 1; i <= 10; ++i) {
    const bool oos = map.is_oos(v.id("w" + std::to_string(i)));
    CHECK(oos == (i > 5));
  }
  CHECK(map.oos_members() == 6);
  CHECK(map.output_size() == 7);
  // OOS mass is split evenly.
  CHECK(map.word_logprob(std::log(0.6), v.id("w9")) == doctest::Approx(std::log(0.1)));
}

TEST_CASE("reserved tokens are refused in corpus text") {
  std::vector<std::string> text = {"a <s> b"};
  CHECK_THROWS_AS(Vocabulary::build(text, kAllWords), FormatError);
}

TEST_CASE("vocabulary file round trip") {
  std::vector<std::string> text = {"c b a", "a b", "a"};
  auto v = Vocabulary::build(text, kAllWords);
  std::ostringstream out;
  v.write(out);
  std::istringstream in(out.str());
  auto w = Vocabulary::read(in);
  CHECK(w.words() == v.words());
  CHECK(w.shortlist_size() == v.shortlist_size());
}

TEST_CASE("encode") {
  std::vector<std::string> text = {"a b"};
  auto v = Vocabulary::build(text, kAllWords);
  CHECK(encode(v, "a b") == std::vector<WordId>{v.sent_begin(), v.id("a"), v.id("b"), v.sent_end()});
  CHECK(encode(v, "a z") == std::vector<WordId>{v.sent_begin(), v.id("a"), v.oov(), v.sent_end()});
  CHECK(encode(v, "") == std::vector<WordId>{v.sent_begin(), v.sent_end()});
  CHECK(decode(v, encode(v, "b z a")) == "b <oov> a");
}

TEST_CASE("spliced batches") {
  std::vector<std::string> text = {"w"};
  auto v = Vocabulary::build(text, kAllWords);

  SUBCASE("one stream concatenates") {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({1, 2}));
    auto b = make_spliced_batches(c, 1);
    REQUIRE(b.num_streams() == 1);
    CHECK(b.streams[0].size() == 7);
    // The second <s> is not a target.
    CHECK(b.step_targets[0][2] == kNoTarget);
    CHECK(b.step_targets[0][1] == v.sent_end());
  }
  SUBCASE("two equal sentences in two streams") {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({2, 2}));
    auto b = make_spliced_batches(c, 2);
    CHECK(b.streams[0].size() == 4);
    CHECK(b.streams[1].size() == 4);
  }
  SUBCASE("greedy assignment balances streams") {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({5, 4, 4, 3, 2, 2}));
    auto b = make_spliced_batches(c, 2);
    auto words = [&](const std::vector<WordId>& s) {
      return std::count_if(s.begin(), s.end(), [&](WordId id) { return id == v.id("w"); });
    };
    CHECK(words(b.streams[0]) == 10);
    CHECK(words(b.streams[1]) == 10);
    CHECK(b.length_ratio() == 1.0);
  }
  SUBCASE("too many streams") {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({1}));
    CHECK_THROWS_AS(make_spliced_batches(c, 2), UsageError);
    CHECK_THROWS_AS(make_spliced_batches(c, 0), UsageError);
  }
}

TEST_CASE("null aligned batches") {
  std::vector<std::string> text = {"w"};
  auto v = Vocabulary::build(text, kAllWords);
  {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({1, 3}));
    auto b = make_null_aligned_batches(c, 2, v.null());
    REQUIRE(b.size() == 1);
    CHECK(b[0].num_cols == 5);
    std::size_t nulls = 0;
    for (std::size_t col = 0; col < 5; ++col) nulls += b[0].is_null(0, col);
    CHECK(nulls == 2);
    CHECK(b[0].at(0, 4) == v.null());
  }
  {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({2, 2, 2}));
    for (const auto& b : make_null_aligned_batches(c, 3, v.null())) {
      for (bool m : b.null_mask) CHECK_FALSE(m);
    }
  }
  {
    auto c = TokenizedCorpus::from_lines(v, lines_of_lengths({3, 1, 5, 1, 2, 7, 2}));
    std::size_t real = 0;
    for (const auto& b : make_null_aligned_batches(c, 3, v.null())) {
      for (bool m : b.null_mask) real += !m;
    }
    CHECK(real == c.token_count());
  }
}

TEST_CASE("future window") {
  const WordId B = 10, E = 11, PAD = 15;
  std::vector<WordId> s = {B, 5, 6, 7, E};
  auto w = future_window(s, 2, 2, PAD);
  CHECK(w.ids == std::vector<WordId>{7, E});
  CHECK(w.pad_mask == std::vector<bool>{false, false});
  w = future_window(s, 4, 2, PAD);
  CHECK(w.ids == std::vector<WordId>{PAD, PAD});
  w = future_window(s, 3, 3, PAD);
  CHECK(w.ids == std::vector<WordId>{E, PAD, PAD});
  CHECK(w.pad_mask == std::vector<bool>{false, true, true});
  CHECK(future_window(s, 1, 0, PAD).ids.empty());
  CHECK_THROWS_AS(future_window(s, 5, 1, PAD), UsageError);
}
