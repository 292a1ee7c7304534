#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "skillopt/errors.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/package_io.hpp"
#include "skillopt/skill_package.hpp"

using namespace skillopt;

namespace {

errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return errc::io_error;
}

SkillPackage seed_package() {
  return parse_package(read_directory(FIXTURES_DIR "/orqa-seed"));
}

std::vector<TaskInstance> three_instances() {
  auto dataset = load_dataset_jsonl(FIXTURES_DIR "/dataset.jsonl");
  dataset.resize(3);
  return dataset;
}

class StubRunner : public AgentRunner {
public:
  explicit StubRunner(std::map<std::string, std::string> outputs)
      : outputs_(std::move(outputs)) {}
  std::string run(const SkillPackage&, const TaskInstance& instance) override {
    return outputs_.at(instance.id);
  }

private:
  std::map<std::string, std::string> outputs_;
};

class FlakyRunner : public AgentRunner {
public:
  explicit FlakyRunner(int failures_per_instance)
      : failures_per_instance_(failures_per_instance) {}
  std::string run(const SkillPackage&, const TaskInstance& instance) override {
    if (calls_[instance.id]++ < failures_per_instance_) {
      raise(errc::runner_failure, "transient crash");
    }
    return "Answer: " + instance.answer;
  }

private:
  int failures_per_instance_;
  std::map<std::string, int> calls_;
};

}  // namespace

TEST_CASE("the dataset fixture loads with both option spellings") {
  const auto dataset = load_dataset_jsonl(FIXTURES_DIR "/dataset.jsonl");
  REQUIRE(dataset.size() == 12);
  CHECK(dataset[0].id == "q01");
  CHECK(dataset[0].answer == "B");
  REQUIRE(dataset[0].options.size() == 4);
  CHECK(dataset[0].options[0].first == "A");
  CHECK(dataset[9].id == "q10");
  REQUIRE(dataset[9].options.size() == 4);
  CHECK(dataset[9].options[0].second == "plan one, fewer setups");
}

TEST_CASE("splits are disjoint, covering and seed-reproducible") {
  const auto dataset = load_dataset_jsonl(FIXTURES_DIR "/dataset.jsonl");
  const auto splits = load_splits(dataset, {4, 4, 4}, 13);
  CHECK(splits.search.size() == 4);
  CHECK(splits.confirm.size() == 4);
  CHECK(splits.test.size() == 4);
  CHECK(splits.sampling_seed == 13);

  std::set<std::string> seen;
  for (const auto* part : {&splits.search, &splits.confirm, &splits.test}) {
    for (const auto& inst : *part) seen.insert(inst.id);
  }
  CHECK(seen.size() == 12);

  const auto again = load_splits(dataset, {4, 4, 4}, 13);
  CHECK(again.search == splits.search);
  CHECK(again.confirm == splits.confirm);
  CHECK(again.test == splits.test);

  const auto shifted = load_splits(dataset, {4, 4, 4}, 14);
  CHECK(shifted.search != splits.search);

  CHECK(code_of([&] { load_splits(dataset, {6, 4, 4}, 1); }) ==
        errc::insufficient_data);

  auto dupes = dataset;
  dupes[1].id = dupes[0].id;
  CHECK(code_of([&] { load_splits(dupes, {2, 2, 2}, 1); }) == errc::id_mismatch);
}

TEST_CASE("exact_match_score compares label lists by id") {
  using Pairs = std::vector<std::pair<std::string, std::string>>;
  const Pairs gold = {{"a", "A"}, {"b", "B"}, {"c", "C"}, {"d", "D"}};
  CHECK(exact_match_score(gold, gold) == 1.0);

  Pairs half = gold;
  half[0].second = "B";
  half[1].second = "A";
  CHECK(exact_match_score(half, gold) == 0.5);

  CHECK(code_of([&] { exact_match_score({}, {}); }) == errc::empty_instance_set);
  CHECK(code_of([&] {
          exact_match_score({{"a", "A"}}, {{"a", "A"}, {"b", "B"}});
        }) == errc::id_mismatch);
  CHECK(code_of([&] {
          exact_match_score({{"x", "A"}, {"b", "B"}}, {{"a", "A"}, {"b", "B"}});
        }) == errc::id_mismatch);
}

TEST_CASE("extract_answer_label scans the final non-empty line") {
  const std::vector<std::pair<std::string, std::string>> options = {
      {"A", "one"}, {"B", "two"}, {"C", "three"}, {"D", "four"}};
  CHECK(extract_answer_label("Answer: B", options) == "B");
  CHECK(extract_answer_label("thinking...\nAnswer: C\n\n", options) == "C");
  CHECK(extract_answer_label("the answer is (D).", options) == "D");
  CHECK(extract_answer_label("A was tempting\nbut the answer is B", options) == "B");
  CHECK_FALSE(extract_answer_label("no label here", options).has_value());
  CHECK_FALSE(extract_answer_label("", options).has_value());
  CHECK_FALSE(extract_answer_label("Answer: E", options).has_value());
}

TEST_CASE("evaluate_skill scores, groups errors and digests outputs") {
  const auto pkg = seed_package();
  const auto instances = three_instances();
  StubRunner runner({
      {"q01", "Answer: B"},
      {"q02", "Answer: B"},
      {"q03", "mumbling with no label"},
  });
  const auto report = evaluate_skill(pkg, instances, runner);
  CHECK(report.reward == doctest::Approx(1.0 / 3.0));
  REQUIRE(report.per_instance.size() == 3);
  CHECK(report.per_instance[0].id == "q01");
  CHECK(report.per_instance[0].correct);
  CHECK(report.per_instance[1].correct == false);
  CHECK(report.per_instance[1].predicted == "B");
  CHECK(report.per_instance[2].parseable == false);
  CHECK(report.per_instance[0].output_digest ==
        report.per_instance[1].output_digest);
  CHECK(report.diagnostics ==
        "1/3 correct; errors by question type: constraint=1 variable=1; "
        "unparseable outputs: 1");
}

TEST_CASE("evaluate_skill retries transient runner failures once") {
  const auto pkg = seed_package();
  const auto instances = three_instances();

  FlakyRunner once(1);
  const auto report = evaluate_skill(pkg, instances, once);
  CHECK(report.reward == 1.0);

  FlakyRunner always(100);
  CHECK(code_of([&] { evaluate_skill(pkg, instances, always); }) ==
        errc::runner_failure);
}

TEST_CASE("SubprocessRunner shells out and scores the fixture agents") {
  const auto pkg = seed_package();
  const auto instances = three_instances();

  SubprocessRunner gold("sh " FIXTURES_DIR "/runner_gold.sh");
  auto report = evaluate_skill(pkg, instances, gold);
  CHECK(report.reward == 1.0);

  SubprocessRunner constant("sh " FIXTURES_DIR "/runner_const.sh");
  report = evaluate_skill(pkg, instances, constant);
  CHECK(report.reward == doctest::Approx(1.0 / 3.0));

  SubprocessRunner broken("sh " FIXTURES_DIR "/runner_fail.sh");
  CHECK(code_of([&] { evaluate_skill(pkg, instances, broken); }) ==
        errc::runner_failure);
}

TEST_CASE("ExactMatchEvaluator wraps the harness and maps runner failures") {
  const auto pkg = seed_package();
  const auto structure = derive_structure(pkg);
  const auto content = extract_content(pkg, structure);

  ExactMatchEvaluator evaluator(three_instances(),
                                std::make_shared<SubprocessRunner>(
                                    "sh " FIXTURES_DIR "/runner_gold.sh"));
  const auto outcome = evaluator.evaluate(structure, content, 0);
  CHECK(outcome.reward == 1.0);
  CHECK(outcome.diagnostics.find("3/3 correct") != std::string::npos);

  ExactMatchEvaluator failing(three_instances(),
                              std::make_shared<SubprocessRunner>(
                                  "sh " FIXTURES_DIR "/runner_fail.sh"));
  CHECK(code_of([&] { failing.evaluate(structure, content, 0); }) ==
        errc::evaluator_failure);
}

TEST_CASE("predicates cover every documented form") {
  const auto pkg = seed_package();
  const auto structure = derive_structure(pkg);
  const auto content = extract_content(pkg, structure);

  CHECK(eval_predicate("has_section:Workflow", structure, content));
  CHECK_FALSE(eval_predicate("has_section:Ghost", structure, content));
  CHECK(eval_predicate("has_reference:references/question-types.md", structure,
                       content));
  CHECK_FALSE(eval_predicate("has_script:scripts/x.py", structure, content));
  CHECK_FALSE(eval_predicate("has_asset:assets/a.png", structure, content));
  CHECK(eval_predicate("has_metadata_key:allowed_tools", structure, content));
  CHECK(eval_predicate("section_count=3", structure, content));
  CHECK_FALSE(eval_predicate("section_count=4", structure, content));
  CHECK(eval_predicate("reference_count=1", structure, content));
  CHECK(eval_predicate("script_count=0", structure, content));
  CHECK(eval_predicate("asset_count=0", structure, content));
  CHECK(eval_predicate("body_contains:recompute", structure, content));
  CHECK_FALSE(eval_predicate("body_contains:gradient descent", structure, content));
  CHECK(eval_predicate("description_contains:multiple-choice", structure, content));

  CHECK(code_of([&] { eval_predicate("bogus:thing", structure, content); }) ==
        errc::domain_error);
  CHECK(code_of([&] { eval_predicate("section_count=x", structure, content); }) ==
        errc::domain_error);
}

TEST_CASE("the synthetic landscape is deterministic per draw and clamped") {
  const auto pkg = seed_package();
  const auto structure = derive_structure(pkg);
  const auto content = extract_content(pkg, structure);

  const auto landscape = load_landscape(FIXTURES_DIR "/landscape.json");
  CHECK(landscape.base_reward == 0.6);
  CHECK(landscape.noise_sd == 0.0);
  REQUIRE(landscape.bonuses.size() == 4);

  CHECK(synth_evaluate(structure, content, landscape, 0) == doctest::Approx(0.6));
  CHECK(synth_evaluate(structure, content, landscape, 5) ==
        synth_evaluate(structure, content, landscape, 0));

  SyntheticLandscape noisy;
  noisy.base_reward = 0.5;
  noisy.noise_sd = 0.05;
  noisy.rng_seed = 42;
  const double a = synth_evaluate(structure, content, noisy, 0);
  const double b = synth_evaluate(structure, content, noisy, 0);
  const double c = synth_evaluate(structure, content, noisy, 1);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);

  SyntheticLandscape hot;
  hot.base_reward = 1.3;
  CHECK(synth_evaluate(structure, content, hot, 0) == 1.0);
  SyntheticLandscape cold;
  cold.base_reward = 0.1;
  cold.bonuses = {{"reference_count=1", -0.5}};
  CHECK(synth_evaluate(structure, content, cold, 0) == 0.0);

  SyntheticEvaluator offset_eval(noisy, 1);
  CHECK(offset_eval.evaluate(structure, content, 0).reward == c);

  SyntheticEvaluator plain(landscape);
  const auto outcome = plain.evaluate(structure, content, 0);
  CHECK(outcome.reward == doctest::Approx(0.6));
  CHECK(outcome.diagnostics.find("bonus predicates satisfied: 0/4") !=
        std::string::npos);
}
