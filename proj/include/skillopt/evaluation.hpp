#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skillopt/skill_package.hpp"

namespace skillopt {

/**
 * Reward measurement for candidate packages. Two interchangeable backends sit
 * behind the Evaluator interface: an exact-match harness that runs a real
 * agent command over task instances, and a synthetic landscape that scores
 * structures/content directly for fast, reproducible experiments. Rewards are
 * always in [0, 1].
 */

struct TaskInstance {
  std::string id;
  std::string context;
  std::string question;
  // (label, text) pairs, e.g. ("A", "maximize total profit").
  std::vector<std::pair<std::string, std::string>> options;
  std::string answer;

  bool operator==(const TaskInstance&) const = default;
};

struct SplitSet {
  std::vector<TaskInstance> search;
  std::vector<TaskInstance> confirm;
  std::vector<TaskInstance> test;
  std::uint64_t sampling_seed = 0;
};

struct InstanceResult {
  std::string id;
  std::string predicted;
  bool correct = false;
  bool parseable = true;
  std::string output_digest;
};

struct EvalReport {
  double reward = 0.0;
  std::vector<InstanceResult> per_instance;
  std::string diagnostics;
};

class AgentRunner {
public:
  virtual ~AgentRunner() = default;
  // Returns the agent's raw textual output for one instance. Throws
  // Error(runner_failure) when the agent cannot be executed.
  virtual std::string run(const SkillPackage& candidate, const TaskInstance& instance) = 0;
};

// Invokes `command <package_dir> <instance_json>` through the shell and
// captures stdout. A nonzero exit status is a runner failure.
class SubprocessRunner : public AgentRunner {
public:
  explicit SubprocessRunner(std::string command);
  std::string run(const SkillPackage& candidate, const TaskInstance& instance) override;

private:
  std::string command_;
  std::uint64_t counter_ = 0;
};

std::vector<TaskInstance> load_dataset_jsonl(const std::filesystem::path& file);

// Disjoint search/confirm/test splits drawn without replacement after a
// seeded Fisher-Yates shuffle. sizes = {n_search, n_confirm, n_test}.
SplitSet load_splits(const std::vector<TaskInstance>& dataset,
                     const std::array<std::size_t, 3>& sizes, std::uint64_t seed);

// Fraction of ids whose predicted label equals the gold label. Both lists are
// (id, label) pairs and must cover the same ids.
double exact_match_score(
    const std::vector<std::pair<std::string, std::string>>& predictions,
    const std::vector<std::pair<std::string, std::string>>& gold);

// Scans the final non-empty line of raw output for the first token that
// matches an option label exactly, after stripping surrounding punctuation.
std::optional<std::string> extract_answer_label(
    const std::string& raw, const std::vector<std::pair<std::string, std::string>>& options);

// Runs every instance (one retry per instance on runner failure), extracts
// labels, scores exact match and summarizes wrong answers by question type.
EvalReport evaluate_skill(const SkillPackage& candidate,
                          const std::vector<TaskInstance>& instances,
                          AgentRunner& runner, int retries = 1);

/**
 * Synthetic reward landscape: base reward plus a bonus for every satisfied
 * predicate, plus optional Gaussian noise, clipped to [0, 1]. Draws with the
 * same (rng_seed, draw_index) are identical; different draw indices are
 * independent regardless of call order.
 *
 * Predicate forms:
 *   has_section:<heading>        has_reference:<path>   has_script:<path>
 *   has_asset:<path>             has_metadata_key:<key>
 *   section_count=<k>            reference_count=<k>    script_count=<k>
 *   asset_count=<k>              body_contains:<needle>
 *   description_contains:<needle>
 * section_count counts named headings (the preamble does not count).
 */
struct SyntheticLandscape {
  double base_reward = 0.5;
  std::vector<std::pair<std::string, double>> bonuses;
  double noise_sd = 0.0;
  std::uint64_t rng_seed = 0;
};

SyntheticLandscape load_landscape(const std::filesystem::path& file);

// Throws Error(domain_error) on an unparseable predicate.
bool eval_predicate(const std::string& predicate, const Structure& structure,
                    const ContentState& content);

double synth_evaluate(const Structure& structure, const ContentState& content,
                      const SyntheticLandscape& landscape, std::int64_t draw_index);

struct EvalOutcome {
  double reward = 0.0;
  std::string diagnostics;
};

class Evaluator {
public:
  virtual ~Evaluator() = default;
  virtual EvalOutcome evaluate(const Structure& structure, const ContentState& content,
                               std::int64_t draw_index) = 0;
};

class SyntheticEvaluator : public Evaluator {
public:
  explicit SyntheticEvaluator(SyntheticLandscape landscape, std::int64_t draw_offset = 0);
  EvalOutcome evaluate(const Structure& structure, const ContentState& content,
                       std::int64_t draw_index) override;

private:
  SyntheticLandscape landscape_;
  std::int64_t draw_offset_;
};

class ExactMatchEvaluator : public Evaluator {
public:
  ExactMatchEvaluator(std::vector<TaskInstance> instances,
                      std::shared_ptr<AgentRunner> runner);
  EvalOutcome evaluate(const Structure& structure, const ContentState& content,
                       std::int64_t draw_index) override;

private:
  std::vector<TaskInstance> instances_;
  std::shared_ptr<AgentRunner> runner_;
};

}  // namespace skillopt
