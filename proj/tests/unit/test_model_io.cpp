#include <sstream>

#include "doctest.h"
#include "surnn/error.hpp"
#include "surnn/model_io.hpp"

using namespace surnn;

namespace {

std::string text_of(const AnyModel& m) {
  std::ostringstream out;
  write_model(m, out);
  return out.str();
}

template <typename M>
void check_round_trip(M model) {
  const auto first = text_of(AnyModel(model));
  std::istringstream in(first);
  const AnyModel back = read_model(in);
  REQUIRE(std::holds_alternative<M>(back));
  CHECK(text_of(back) == first);
  auto a = model.params();
  M copy = std::get<M>(back);
  auto b = copy.params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    for (Index j = 0; j < a[i].size(); ++j) CHECK(a[i].data[j] == b[i].data[j]);
  }
}

}  // namespace

TEST_CASE("model files round trip exactly") {
  std::vector<std::string> lines = {"a b c", "c d"};
  auto v = Vocabulary::build(lines, 3);
  UniRnnlm uni(ModelConfig::for_vocab(Arch::kUni, v, 3, 4));
  uni.init_random(1);
  check_round_trip(uni);
  BiRnnlm bi(ModelConfig::for_vocab(Arch::kBi, v, 3, 4));
  bi.init_random(2);
  check_round_trip(bi);
  SuRnnlm su(ModelConfig::for_vocab(Arch::kSu, v, 3, 4, 2, 5));
  su.init_random(3);
  check_round_trip(su);
  CHECK(model_config(AnyModel(su)).succ == 2);
  CHECK(model_config(AnyModel(su)).shortlist == 3);
}

TEST_CASE("malformed model files") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_model(empty, "empty.model"), FormatError);
  std::vector<std::string> lines = {"a b"};
  auto v = Vocabulary::build(lines, kAllWords);
  UniRnnlm uni(ModelConfig::for_vocab(Arch::kUni, v, 2, 2));
  auto text = text_of(AnyModel(uni));
  text.resize(text.size() / 2);
  std::istringstream cut(text);
  CHECK_THROWS_AS(read_model(cut, "cut.model"), FormatError);
}
