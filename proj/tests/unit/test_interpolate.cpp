#include <cmath>
#include <random>

#include "doctest.h"
#include "surnn/error.hpp"
#include "surnn/interpolate.hpp"

using namespace surnn;

TEST_CASE("linear interpolation") {
  CHECK(linear(0.2, 0.4, 0.0) == 0.2);
  CHECK(linear(0.2, 0.4, 1.0) == 0.4);
  CHECK(linear(0.2, 0.4, 0.75) == doctest::Approx(0.35));
  // Monotone in each argument and, with p_uni > p_ngram, in lambda1.
  CHECK(linear(0.3, 0.4, 0.5) > linear(0.2, 0.4, 0.5));
  CHECK(linear(0.2, 0.5, 0.5) > linear(0.2, 0.4, 0.5));
  CHECK(linear(0.2, 0.4, 0.6) > linear(0.2, 0.4, 0.5));
}

TEST_CASE("log-linear score") {
  CHECK(loglinear_score(0.3, 0.6, 0.0) == std::log(0.3));
  CHECK(loglinear_score(0.3, 0.6, 1.0) == std::log(0.6));
  CHECK(loglinear_score(0.3, 0.6, 0.3) == doctest::Approx(0.7 * std::log(0.3) + 0.3 * std::log(0.6)));
  CHECK(std::isinf(loglinear_score(0.3, 0.0, 0.3)));
  // A zero future probability does not matter at lambda2 = 0.
  CHECK(loglinear_score(0.3, 0.0, 0.0) == std::log(0.3));
}

TEST_CASE("two-stage combination") {
  const InterpConfig cfg{0.75, 0.3};
  CHECK(two_stage(0.2, 0.4, 0.5, cfg) == doctest::Approx(0.7 * std::log(0.35) + 0.3 * std::log(0.5)));
  CHECK(two_stage(0.2, 0.4, 0.5, {0.75, 0.0}) == std::log(linear(0.2, 0.4, 0.75)));
  CHECK(two_stage(0.2, 0.4, 0.5, {0.0, 0.0}) == std::log(0.2));
  // The n-gram floor keeps the score finite.
  CHECK(two_stage(0.0, 0.4, 0.5, {0.0, 0.0}) == std::log(kNgramFloor));

  WordComponents c{0.2, 0.4, 0.5};
  CHECK(combined_logprob(c, cfg) == two_stage(0.2, 0.4, 0.5, cfg));
  CHECK(combined_logprob({0.2, {}, {}}, cfg) == std::log(0.2));
  CHECK(combined_logprob({0.2, 0.4, {}}, cfg) == std::log(linear(0.2, 0.4, 0.75)));
  CHECK(combined_logprob({0.2, {}, 0.5}, cfg) == loglinear_score(0.2, 0.5, 0.3));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(InterpConfig{0.0, 1.0}.validate());
  CHECK_THROWS_AS((InterpConfig{1.2, 0.3}.validate()), UsageError);
  CHECK_THROWS_AS((InterpConfig{0.5, -0.1}.validate()), UsageError);
}

TEST_CASE("grid search on a single point") {
  DevUtterance u;
  u.ref_length = 2;
  u.hyps.push_back({{{0.5, 0.5, {}}}, -1.0, 0});
  const auto r = grid_search_wer({u}, {0.4}, {0.2}, 1.0, 1.0);
  CHECK(r.lambda1 == 0.4);
  CHECK(r.lambda2 == 0.2);
  CHECK(r.objective == 0.0);
}

TEST_CASE("grid search ties go to the smaller weight") {
  DevUtterance u;
  u.ref_length = 1;
  u.hyps.push_back({{{0.5, 0.5, {}}}, 0.0, 0});
  const auto r = grid_search_wer({u}, {0.5, 0.3}, {0.0}, 1.0, 1.0);
  CHECK(r.lambda1 == 0.3);

  std::vector<WordComponents> words = {{0.5, 0.5, {}}};
  CHECK(grid_search_ppl(words, {0.5, 0.3}).lambda1 == 0.3);
}

TEST_CASE("grid search finds the weight of the true distribution") {
  std::mt19937_64 rng(1);
  const std::vector<double> q = {0.5, 0.25, 0.15, 0.07, 0.03};
  std::discrete_distribution<int> draw(q.begin(), q.end());
  std::vector<WordComponents> words;
  for (int i = 0; i < 5000; ++i) {
    const int w = draw(rng);
    words.push_back({0.2, q[static_cast<std::size_t>(w)], {}});
  }
  CHECK(grid_search_ppl(words, default_grid()).lambda1 == 1.0);

  // WER: the uni component prefers the correct hypothesis, the n-gram the
  // wrong one; the mixture flips once lambda1 exceeds 8/9.
  std::vector<DevUtterance> dev;
  for (int i = 0; i < 20; ++i) {
    DevUtterance u;
    u.ref_length = 1;
    u.hyps.push_back({{{0.9, 0.3, {}}}, 0.0, 1});
    u.hyps.push_back({{{0.1, 0.4, {}}}, 0.0, 0});
    dev.push_back(u);
  }
  const auto r = grid_search_wer(dev, default_grid(), {0.0}, 1.0, 1.0);
  CHECK(r.lambda1 == 0.9);
  CHECK(r.objective == 0.0);
}
