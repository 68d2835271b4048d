#include <doctest.h>

#include <algorithm>
#include <set>

#include "blm/data.hpp"
#include "blm/error.hpp"
#include "helpers.hpp"

using namespace blm;

namespace {

BLMInstance make_instance(const std::string& id, Dataset d = Dataset::agreement_fr, TypeTier t = TypeTier::I) {
  BLMInstance inst;
  inst.id = id;
  inst.dataset = d;
  inst.type_tier = t;
  for (int i = 0; i < kContextLength; ++i)
    inst.context.push_back({context_sentence_id(id, i), "Le chat " + std::to_string(i) + " dort.", d, t});
  const auto labels = labels_for(d);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    inst.answers.push_back({{answer_sentence_id(id, static_cast<int>(j)), "Réponse " + std::to_string(j), d, t},
                            labels[j]});
    if (labels[j] == AnswerLabel::Correct) inst.correct_index = static_cast<int>(j);
  }
  return inst;
}

std::vector<BLMInstance> make_dataset(std::size_t n) {
  std::vector<BLMInstance> xs;
  for (std::size_t i = 0; i < n; ++i)
    xs.push_back(make_instance("inst" + std::to_string(i), Dataset::agreement_fr,
                               static_cast<TypeTier>(i % 3)));
  return xs;
}

}  // namespace

TEST_CASE("label sets per dataset") {
  const auto agr = labels_for(Dataset::agreement_fr);
  CHECK(agr.size() == 6);
  CHECK(agr[0] == AnswerLabel::Correct);
  CHECK(label_allowed(AnswerLabel::WN2, Dataset::agreement_fr));
  CHECK_FALSE(label_allowed(AnswerLabel::SSM, Dataset::agreement_fr));
  const auto alt = labels_for(Dataset::alt_atl);
  CHECK(alt.size() == 8);
  CHECK(labels_for(Dataset::atl_alt).size() == 8);
  CHECK(label_allowed(AnswerLabel::AASSM, Dataset::atl_alt));
  CHECK(is_lexical_error(AnswerLabel::NoEmb));
  CHECK(is_lexical_error(AnswerLabel::LexPrep));
  CHECK_FALSE(is_lexical_error(AnswerLabel::SSM));
}

TEST_CASE("enum names roundtrip") {
  for (Dataset d : {Dataset::agreement_fr, Dataset::alt_atl, Dataset::atl_alt}) CHECK(parse_dataset(to_string(d)) == d);
  for (TypeTier t : {TypeTier::I, TypeTier::II, TypeTier::III}) CHECK(parse_type_tier(to_string(t)) == t);
  for (Dataset d : {Dataset::agreement_fr, Dataset::alt_atl})
    for (AnswerLabel l : labels_for(d)) CHECK(parse_answer_label(to_string(l)) == l);
  CHECK_THROWS_AS(parse_dataset("english"), Error);
  CHECK_THROWS_AS(parse_answer_label("WN3"), Error);
}

TEST_CASE("validate_instance rejects broken instances") {
  BLMInstance ok = make_instance("x");
  CHECK_NOTHROW(validate_instance(ok));

  auto short_ctx = ok;
  short_ctx.context.pop_back();
  CHECK_THROWS_WITH_AS(validate_instance(short_ctx), "instance 'x': context length 6 != 7", ValidationError);

  auto two_correct = ok;
  two_correct.answers[1].label = AnswerLabel::Correct;
  CHECK_THROWS_AS(validate_instance(two_correct), ValidationError);

  auto wrong_set = ok;
  wrong_set.answers[2].label = AnswerLabel::SSM;
  CHECK_THROWS_AS(validate_instance(wrong_set), ValidationError);

  auto bad_index = ok;
  bad_index.correct_index = 3;
  CHECK_THROWS_AS(validate_instance(bad_index), ValidationError);
}

TEST_CASE("JSONL roundtrip is byte-exact") {
  auto xs = make_dataset(12);
  xs.push_back(make_instance("alt-1", Dataset::alt_atl, TypeTier::III));
  const std::string text = dataset_to_jsonl(xs);
  const auto back = parse_dataset_jsonl(text);
  REQUIRE(back.size() == xs.size());
  CHECK(dataset_to_jsonl(back) == text);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(back[i].id == xs[i].id);
    CHECK(back[i].correct_index == xs[i].correct_index);
    CHECK(back[i].answers.size() == xs[i].answers.size());
    CHECK(back[i].context[3].text == xs[i].context[3].text);
  }

  testutil::TempDir dir("jsonl");
  write_dataset(dir.path / "d.jsonl", xs);
  CHECK(testutil::slurp(dir.path / "d.jsonl") == text);
  CHECK(load_dataset(dir.path / "d.jsonl").size() == xs.size());
}

TEST_CASE("JSONL errors carry line numbers") {
  const std::string good = dataset_to_jsonl(make_dataset(2));
  CHECK_THROWS_WITH_AS(parse_dataset_jsonl(good + "{not json\n"), doctest::Contains("line 3: malformed JSON"),
                       FormatError);
  CHECK_THROWS_WITH_AS(parse_dataset_jsonl(good + "{\"id\": \"z\"}\n"), doctest::Contains("line 3: schema error"),
                       FormatError);
  const std::string one = dataset_to_jsonl(make_dataset(1));
  CHECK_THROWS_WITH_AS(parse_dataset_jsonl(one + one), doctest::Contains("line 2: duplicate instance id"),
                       ValidationError);
  CHECK_THROWS_AS(parse_dataset_jsonl(one, Dataset::alt_atl), ValidationError);
  // blank lines are skipped
  CHECK(parse_dataset_jsonl("\n" + one + "\n\n").size() == 1);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.jsonl"), IoError);
}

TEST_CASE("split sizes follow round-half-up") {
  auto check = [](std::size_t n, std::size_t test, std::size_t dev, std::size_t train) {
    const auto s = split_sizes(n);
    CHECK(s.test == test);
    CHECK(s.dev == dev);
    CHECK(s.train == train);
  };
  check(2304, 230, 415, 1659);
  check(100, 10, 18, 72);
  check(10, 1, 2, 7);
  // integer oracle: round_half_up(p / 10) = (p + 5) / 10
  for (std::size_t n = 10; n <= 5000; ++n) {
    const std::size_t test = (n + 5) / 10;
    const std::size_t dev = (2 * (n - test) + 5) / 10;
    const auto s = split_sizes(n);
    REQUIRE(s.test == test);
    REQUIRE(s.dev == dev);
    REQUIRE(s.train + s.dev + s.test == n);
  }
}

TEST_CASE("split is a deterministic partition that keeps file order") {
  const auto xs = make_dataset(137);
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const auto s = split_dataset(xs, seed);
    const auto sizes = split_sizes(xs.size());
    CHECK(s.train.size() == sizes.train);
    CHECK(s.dev.size() == sizes.dev);
    CHECK(s.test.size() == sizes.test);
    std::set<std::string> ids;
    auto index_of = [&](const std::string& id) { return std::stoi(id.substr(4)); };
    for (const auto* part : {&s.train, &s.dev, &s.test}) {
      for (std::size_t i = 0; i < part->size(); ++i) {
        CHECK(ids.insert((*part)[i].id).second);
        if (i > 0) CHECK(index_of((*part)[i - 1].id) < index_of((*part)[i].id));
      }
    }
    CHECK(ids.size() == xs.size());
    const auto again = split_dataset(xs, seed);
    CHECK(dataset_to_jsonl(again.test) == dataset_to_jsonl(s.test));
  }
  CHECK(dataset_to_jsonl(split_dataset(xs, 1).test) != dataset_to_jsonl(split_dataset(xs, 2).test));
  CHECK_THROWS_AS(split_dataset(make_dataset(9), 0), DataError);
}

TEST_CASE("filter by type tier") {
  const auto xs = make_dataset(30);
  const auto t3 = filter_by_type(xs, TypeTier::III);
  CHECK(t3.size() == 10);
  CHECK(std::all_of(t3.begin(), t3.end(), [](const BLMInstance& x) { return x.type_tier == TypeTier::III; }));
}
