#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skillopt/commands.hpp"
#include "skillopt/manifest.hpp"

namespace {

struct Overrides {
  std::string skill;
  std::string out;
  std::string advisor;
  std::string evaluator;
  std::string dataset;
  std::optional<std::uint64_t> seed;
};

void add_override_options(CLI::App* cmd, std::string& config, Overrides& ov,
                          bool with_output) {
  cmd->add_option("--config", config, "Run manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--skill", ov.skill, "Override the skill directory");
  if (with_output) cmd->add_option("--out", ov.out, "Override the output directory");
  cmd->add_option("--advisor", ov.advisor,
                  "Override the advisor backend (scripted:<playbook> or remote)");
  cmd->add_option("--evaluator", ov.evaluator,
                  "Override the evaluator backend (synthetic:<landscape> or "
                  "exact-match:<runner>)");
  cmd->add_option("--dataset", ov.dataset, "Override the dataset path");
  cmd->add_option("--seed", ov.seed, "Override the search rng seed");
}

skillopt::RunManifest load_with_overrides(const std::string& config, const Overrides& ov) {
  skillopt::RunManifest m = skillopt::load_manifest(config);
  if (!ov.skill.empty()) m.skill_dir = ov.skill;
  if (!ov.out.empty()) m.output_dir = ov.out;
  if (!ov.advisor.empty()) m.advisor = skillopt::parse_advisor_spec(ov.advisor);
  if (!ov.evaluator.empty()) m.evaluator = skillopt::parse_evaluator_spec(ov.evaluator);
  if (!ov.dataset.empty()) m.dataset = ov.dataset;
  if (ov.seed) m.search.rng_seed = *ov.seed;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "skillopt: improves an agent skill package by searching over its "
      "structure and refining its content against an evaluator"};
  app.require_subcommand(1);

  std::string validate_dir;
  CLI::App* validate = app.add_subcommand("validate", "Parse and validate a skill directory");
  validate->add_option("skill_dir", validate_dir, "Skill package directory")->required();

  std::string optimize_config;
  Overrides optimize_ov;
  CLI::App* optimize =
      app.add_subcommand("optimize", "Run one full optimization described by a manifest");
  add_override_options(optimize, optimize_config, optimize_ov, true);

  std::vector<std::string> sweep_configs;
  std::string sweep_out;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run several configs against one shared evaluation protocol");
  sweep->add_option("--config", sweep_configs, "Run manifests (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Sweep output directory")->required();

  std::string evaluate_config;
  std::string evaluate_phase = "search";
  Overrides evaluate_ov;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score the manifest's skill once, without searching");
  add_override_options(evaluate, evaluate_config, evaluate_ov, false);
  evaluate->add_option("--phase", evaluate_phase, "search, confirm or test")
      ->check(CLI::IsMember({"search", "confirm", "test"}));

  std::string export_input;
  std::string export_format = "structured";
  std::string export_out;
  CLI::App* export_tree =
      app.add_subcommand("export-tree", "Re-render a stored search tree");
  export_tree->add_option("input", export_input, "tree.json file or a run directory")
      ->required();
  export_tree->add_option("--format", export_format, "structured or dot")
      ->check(CLI::IsMember({"structured", "dot"}));
  export_tree->add_option("--out", export_out, "Write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      return skillopt::cmd_validate(validate_dir, std::cout, std::cerr);
    }
    if (optimize->parsed()) {
      return skillopt::cmd_optimize(load_with_overrides(optimize_config, optimize_ov),
                                    std::cout, std::cerr);
    }
    if (sweep->parsed()) {
      std::vector<skillopt::RunManifest> manifests;
      for (const std::string& path : sweep_configs) {
        manifests.push_back(skillopt::load_manifest(path));
      }
      return skillopt::cmd_sweep(manifests, sweep_out, std::cout, std::cerr);
    }
    if (evaluate->parsed()) {
      return skillopt::cmd_evaluate(load_with_overrides(evaluate_config, evaluate_ov),
                                    evaluate_phase, std::cout, std::cerr);
    }
    if (export_tree->parsed()) {
      std::optional<std::filesystem::path> out_file;
      if (!export_out.empty()) out_file = export_out;
      return skillopt::cmd_export_tree(export_input, export_format, out_file, std::cout,
                                       std::cerr);
    }
  } catch (const skillopt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return skillopt::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
