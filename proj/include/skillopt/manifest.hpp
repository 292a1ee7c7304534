#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "skillopt/advisor.hpp"
#include "skillopt/outer_search.hpp"
#include "skillopt/skill_package.hpp"

namespace skillopt {

// Backend selector parsed from "kind" or "kind:argument", e.g.
// "scripted:playbook.json", "remote", "synthetic:landscape.json",
// "exact-match:./runner.sh".
struct BackendSpec {
  std::string kind;
  std::string arg;
};

struct SplitSpec {
  std::size_t n_search = 0;
  std::size_t n_confirm = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;

  std::array<std::size_t, 3> sizes() const { return {n_search, n_confirm, n_test}; }
  bool operator==(const SplitSpec&) const = default;
};

// One run configuration. All relative paths in the file are resolved against
// the manifest's own directory at load time.
struct RunManifest {
  std::string name;
  std::filesystem::path skill_dir;
  SearchConfig search;
  RefinementBudget refinement;
  StageBudgets stage_budgets;
  BudgetPolicy budget_policy;
  std::optional<std::filesystem::path> dataset;
  SplitSpec splits;
  BackendSpec advisor{"scripted", ""};
  BackendSpec evaluator{"synthetic", ""};
  std::filesystem::path output_dir;
};

// Throws Error(bad_manifest) for unknown keys, bad types or missing required
// fields; Error(io_error) when the file cannot be read or parsed as JSON.
RunManifest load_manifest(const std::filesystem::path& file);

// Parse "kind" or "kind:argument" command-line overrides, checking the kind
// against the known advisor (scripted, remote) or evaluator (synthetic,
// exact-match) backends. Paths in the argument stay as written.
BackendSpec parse_advisor_spec(const std::string& text);
BackendSpec parse_evaluator_spec(const std::string& text);

}  // namespace skillopt
