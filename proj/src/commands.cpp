#include "skillopt/commands.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "skillopt/advisor.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/inner_refine.hpp"
#include "skillopt/outer_search.hpp"
#include "skillopt/package_io.hpp"
#include "skillopt/skill_package.hpp"
#include "skillopt/tree_export.hpp"

namespace skillopt {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::int64_t kConfirmDrawOffset = 1000000;
constexpr std::int64_t kTestDrawOffset = 2000000;

std::string fmt6(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

std::int64_t phase_offset(const std::string& phase) {
  if (phase == "search") return 0;
  if (phase == "confirm") return kConfirmDrawOffset;
  if (phase == "test") return kTestDrawOffset;
  raise(errc::domain_error, "unknown phase '" + phase + "' (want search, confirm or test)");
}

std::unique_ptr<Advisor> make_advisor(const RunManifest& m) {
  if (m.advisor.kind == "scripted") {
    return std::make_unique<ScriptedAdvisor>(
        ScriptedAdvisor::from_file(m.advisor.arg, m.stage_budgets));
  }
  return std::make_unique<RemoteAdvisor>(RemoteAdvisor::from_env(m.stage_budgets));
}

std::unique_ptr<Evaluator> make_evaluator(const RunManifest& m, const std::string& phase) {
  std::int64_t offset = phase_offset(phase);
  if (m.evaluator.kind == "synthetic") {
    return std::make_unique<SyntheticEvaluator>(load_landscape(m.evaluator.arg), offset);
  }
  auto dataset = load_dataset_jsonl(*m.dataset);
  SplitSet splits = load_splits(dataset, m.splits.sizes(), m.splits.seed);
  std::vector<TaskInstance> instances;
  if (phase == "search") {
    instances = std::move(splits.search);
  } else if (phase == "confirm") {
    instances = std::move(splits.confirm);
  } else {
    instances = std::move(splits.test);
  }
  return std::make_unique<ExactMatchEvaluator>(std::move(instances),
                                               std::make_shared<SubprocessRunner>(m.evaluator.arg));
}

// An output directory is reusable when it is fresh, empty, or holds the
// marker file from a previous run of the same command.
void prepare_output_dir(const fs::path& dir, const std::string& marker) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) {
      raise(errc::io_error, dir.string() + " exists and is not a directory");
    }
    if (!fs::is_empty(dir, ec) && !fs::exists(dir / marker, ec)) {
      raise(errc::io_error, "refusing to overwrite " + dir.string() +
                                ": directory is not empty and has no " + marker +
                                " from a previous run");
    }
  } else if (!fs::create_directories(dir, ec) || ec) {
    raise(errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  }
}

json config_to_json(const RunManifest& m) {
  json splits{{"search", m.splits.n_search},
              {"confirm", m.splits.n_confirm},
              {"test", m.splits.n_test},
              {"seed", m.splits.seed}};
  json search{{"max_rounds", m.search.max_rounds},
              {"selection_policy", policy_name(m.search.selection_policy)},
              {"exploration_constant", m.search.exploration_constant},
              {"alpha", m.search.alpha},
              {"lambda", m.search.lambda},
              {"min_rounds_before_convergence", m.search.min_rounds_before_convergence},
              {"stale_rounds_to_stop", m.search.stale_rounds_to_stop},
              {"improvement_threshold", m.search.improvement_threshold},
              {"rng_seed", m.search.rng_seed},
              {"composite_cap", m.search.composite_cap}};
  if (m.search.action_whitelist) {
    json names = json::array();
    for (EditKind kind : *m.search.action_whitelist) names.push_back(kind_name(kind));
    search["action_whitelist"] = names;
  } else if (m.search.whitelist_from_profile) {
    search["action_whitelist"] = "profile";
  }
  return json{{"name", m.name},
              {"search", search},
              {"refinement",
               {{"max_attempts", m.refinement.max_attempts},
                {"t_crit", m.refinement.t_crit},
                {"variants_per_attempt", m.refinement.variants_per_attempt}}},
              {"splits", splits},
              {"advisor", m.advisor.kind},
              {"evaluator", m.evaluator.kind}};
}

std::string advisor_log_jsonl(const std::vector<AdvisorExchange>& exchanges) {
  std::string text;
  for (const auto& ex : exchanges) {
    json line{{"stage", stage_name(ex.stage)},
              {"prompt_digest", ex.prompt_digest},
              {"tokens_used", ex.tokens_used},
              {"retries", ex.retries},
              {"truncated", ex.truncated}};
    text += line.dump();
    text += '\n';
  }
  return text;
}

struct RunOutput {
  SearchResult result;
  SkillPackage best;
  ValidationReport best_report;
  std::size_t advisor_calls = 0;
  std::size_t advisor_tokens = 0;
};

RunOutput execute_run(const RunManifest& m, const fs::path& out_dir) {
  prepare_output_dir(out_dir, "report.json");
  SkillPackage seed = parse_package(read_directory(m.skill_dir));
  auto advisor = make_advisor(m);
  auto evaluator = make_evaluator(m, "search");

  RunOutput run;
  run.result =
      run_search(seed, m.search, *advisor, *evaluator, m.refinement, m.budget_policy);
  run.best = recompose(run.result.best_content, run.result.best_structure);
  run.best_report = validate(run.best, m.budget_policy);
  run.advisor_calls = advisor->exchanges().size();
  for (const auto& ex : advisor->exchanges()) run.advisor_tokens += ex.tokens_used;

  write_directory(out_dir / "best_skill", serialize_package(run.best));
  write_file(out_dir / "tree.json", tree_to_json(run.result.tree).dump(2) + "\n");
  write_file(out_dir / "tree.dot", tree_to_dot(run.result.tree));
  write_file(out_dir / "round_log.jsonl", round_log_to_jsonl(run.result.round_log));
  write_file(out_dir / "advisor_log.jsonl", advisor_log_jsonl(advisor->exchanges()));

  int accepted = 0;
  for (const auto& rec : run.result.round_log) accepted += rec.accepted ? 1 : 0;
  json warnings = json::array();
  for (const auto& w : run.best_report.warnings) warnings.push_back(w.code);
  json report{{"schema_version", 1},
              {"name", m.name},
              {"seed_reward", run.result.seed_reward},
              {"best_reward", run.result.best_reward},
              {"improvement", run.result.best_reward - run.result.seed_reward},
              {"rounds_run", run.result.rounds_run},
              {"accepted_rounds", accepted},
              {"stop_reason", stop_reason_name(run.result.stop_reason)},
              {"tree_nodes", run.result.tree.nodes.size()},
              {"best_node", run.result.tree.best_id},
              {"best_path", best_path(run.result.tree)},
              {"advisor_calls", run.advisor_calls},
              {"advisor_tokens", run.advisor_tokens},
              {"best_validation",
               {{"valid", run.best_report.valid},
                {"activation_tokens", run.best_report.activation_tokens},
                {"package_bytes", run.best_report.package_bytes},
                {"warnings", warnings}}},
              {"config", config_to_json(m)}};
  write_file(out_dir / "report.json", report.dump(2) + "\n");
  return run;
}

void print_issue(std::ostream& out, const char* severity, const ValidationIssue& issue) {
  out << severity << " " << issue.code;
  if (!issue.where.empty()) out << " [" << issue.where << "]";
  out << ": " << issue.message << "\n";
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.code()) {
    case errc::io_error:
    case errc::bad_manifest:
    case errc::missing_skill_md:
    case errc::malformed_frontmatter:
    case errc::duplicate_heading:
    case errc::unrecognized_top_level_entry:
    case errc::bad_path:
      return 2;
    default:
      return 1;
  }
}

int cmd_validate(const fs::path& skill_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    SkillPackage pkg = parse_package(read_directory(skill_dir));
    ValidationReport report = validate(pkg);
    for (const auto& issue : report.errors) print_issue(out, "error", issue);
    for (const auto& issue : report.warnings) print_issue(out, "warning", issue);
    out << (report.valid ? "valid" : "invalid") << ": name=" << pkg.frontmatter.name
        << " activation_tokens=" << report.activation_tokens
        << " package_bytes=" << report.package_bytes << " errors=" << report.errors.size()
        << " warnings=" << report.warnings.size() << "\n";
    return report.valid ? 0 : 1;
  });
}

int cmd_optimize(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    RunOutput run = execute_run(manifest, manifest.output_dir);
    out << manifest.name << ": seed_reward=" << fmt6(run.result.seed_reward)
        << " best_reward=" << fmt6(run.result.best_reward)
        << " rounds=" << run.result.rounds_run
        << " stop=" << stop_reason_name(run.result.stop_reason)
        << " nodes=" << run.result.tree.nodes.size() << "\n";
    out << "artifacts: " << (manifest.output_dir / "report.json").string() << "\n";
    return 0;
  });
}

int cmd_sweep(const std::vector<RunManifest>& configs, const fs::path& output_dir,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (configs.empty()) raise(errc::bad_manifest, "sweep needs at least one config");
    for (std::size_t i = 1; i < configs.size(); ++i) {
      const RunManifest& a = configs[0];
      const RunManifest& b = configs[i];
      bool same_eval = a.evaluator.kind == b.evaluator.kind && a.evaluator.arg == b.evaluator.arg;
      bool same_data = a.dataset == b.dataset && a.splits == b.splits;
      if (!same_eval || !same_data) {
        raise(errc::bad_manifest,
              "sweep configs must share the evaluator, dataset and splits ('" + a.name +
                  "' vs '" + b.name + "')");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (configs[j].name == b.name) {
          raise(errc::bad_manifest, "duplicate config name '" + b.name + "'");
        }
      }
    }
    prepare_output_dir(output_dir, "sweep_report.json");

    struct Entry {
      const RunManifest* manifest = nullptr;
      bool ok = false;
      std::string error;
      std::optional<RunOutput> run;
    };
    std::vector<Entry> entries;
    for (const RunManifest& m : configs) {
      Entry entry;
      entry.manifest = &m;
      try {
        entry.run = execute_run(m, output_dir / m.name);
        entry.ok = true;
        out << "config " << m.name << ": search_best=" << fmt6(entry.run->result.best_reward)
            << " rounds=" << entry.run->result.rounds_run
            << " stop=" << stop_reason_name(entry.run->result.stop_reason) << "\n";
      } catch (const Error& e) {
        entry.error = e.what();
        err << "config " << m.name << " failed: " << e.what() << "\n";
      }
      entries.push_back(std::move(entry));
    }

    auto confirm_eval = make_evaluator(configs[0], "confirm");
    json config_entries = json::array();
    std::optional<std::size_t> winner;
    double winner_confirm = 0.0;
    std::vector<double> confirm_rewards(entries.size(), 0.0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      Entry& entry = entries[i];
      json row{{"name", entry.manifest->name},
               {"status", entry.ok ? "ok" : "failed"},
               {"output_dir", (output_dir / entry.manifest->name).string()}};
      if (entry.ok) {
        EvalOutcome confirm = confirm_eval->evaluate(entry.run->result.best_structure,
                                                     entry.run->result.best_content,
                                                     static_cast<std::int64_t>(i));
        confirm_rewards[i] = confirm.reward;
        row["seed_reward"] = entry.run->result.seed_reward;
        row["search_best_reward"] = entry.run->result.best_reward;
        row["confirm_reward"] = confirm.reward;
        row["rounds_run"] = entry.run->result.rounds_run;
        row["stop_reason"] = stop_reason_name(entry.run->result.stop_reason);
        out << "confirm " << entry.manifest->name << ": " << fmt6(confirm.reward) << "\n";
        if (!winner || confirm.reward > winner_confirm) {
          winner = i;
          winner_confirm = confirm.reward;
        }
      } else {
        row["error"] = entry.error;
      }
      config_entries.push_back(std::move(row));
    }

    json splits{{"search", configs[0].splits.n_search},
                {"confirm", configs[0].splits.n_confirm},
                {"test", configs[0].splits.n_test},
                {"seed", configs[0].splits.seed}};
    std::string evaluator_spec = configs[0].evaluator.kind;
    if (!configs[0].evaluator.arg.empty()) evaluator_spec += ":" + configs[0].evaluator.arg;
    json report{{"schema_version", 1},
                {"protocol",
                 {{"search_phase", "each config runs its own search on the search draws"},
                  {"confirm_phase",
                   "every finished candidate is re-scored once on held-out confirm draws"},
                  {"selection_rule", "winner is the highest confirm reward, earliest on ties"},
                  {"test_phase", "winner and seed are scored once each on test draws"},
                  {"shared",
                   {{"evaluator", evaluator_spec},
                    {"dataset", configs[0].dataset ? configs[0].dataset->string() : ""},
                    {"splits", splits}}}}},
                {"configs", config_entries}};

    int status = 0;
    if (winner) {
      const Entry& best = entries[*winner];
      auto test_eval = make_evaluator(configs[0], "test");
      EvalOutcome winner_test = test_eval->evaluate(best.run->result.best_structure,
                                                    best.run->result.best_content, 0);
      SkillPackage seed = parse_package(read_directory(best.manifest->skill_dir));
      Structure seed_structure = derive_structure(seed);
      ContentState seed_content = extract_content(seed, seed_structure);
      EvalOutcome seed_test = test_eval->evaluate(seed_structure, seed_content, 1);
      report["winner"] = json{{"name", best.manifest->name},
                              {"index", *winner},
                              {"confirm_reward", confirm_rewards[*winner]}};
      report["test"] = json{{"winner_reward", winner_test.reward},
                            {"seed_reward", seed_test.reward},
                            {"improvement", winner_test.reward - seed_test.reward}};
      out << "winner: " << best.manifest->name << " confirm=" << fmt6(winner_confirm) << "\n";
      out << "test: winner=" << fmt6(winner_test.reward) << " seed=" << fmt6(seed_test.reward)
          << "\n";
    } else {
      report["winner"] = nullptr;
      err << "no config finished; nothing to confirm\n";
      status = 1;
    }
    write_file(output_dir / "sweep_report.json", report.dump(2) + "\n");
    out << "artifacts: " << (output_dir / "sweep_report.json").string() << "\n";
    return status;
  });
}

int cmd_evaluate(const RunManifest& manifest, const std::string& phase, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&]() -> int {
    SkillPackage pkg = parse_package(read_directory(manifest.skill_dir));
    ValidationReport report = validate(pkg, manifest.budget_policy);
    if (!report.valid) {
      for (const auto& issue : report.errors) print_issue(err, "error", issue);
      return 1;
    }
    Structure structure = derive_structure(pkg);
    ContentState content = extract_content(pkg, structure);
    auto evaluator = make_evaluator(manifest, phase);
    EvalOutcome outcome = evaluator->evaluate(structure, content, 0);
    json line{{"phase", phase}, {"reward", outcome.reward}, {"diagnostics", outcome.diagnostics}};
    out << line.dump() << "\n";
    return 0;
  });
}

int cmd_export_tree(const fs::path& input, const std::string& format,
                    const std::optional<fs::path>& out_file, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&]() -> int {
    fs::path file = input;
    std::error_code ec;
    if (fs::is_directory(input, ec)) file = input / "tree.json";
    std::string raw = read_file(file);
    json tree;
    try {
      tree = json::parse(raw);
    } catch (const json::exception& e) {
      raise(errc::bad_manifest, "cannot parse " + file.string() + ": " + e.what());
    }
    std::string rendered;
    if (format == "dot") {
      rendered = tree_json_to_dot(tree);
    } else if (format == "structured") {
      if (!tree.is_object() || !tree.contains("nodes") || !tree.contains("root")) {
        raise(errc::bad_manifest, file.string() + " is not a stored search tree");
      }
      rendered = tree.dump(2) + "\n";
    } else {
      raise(errc::domain_error, "unknown format '" + format + "' (want structured or dot)");
    }
    if (out_file) {
      write_file(*out_file, rendered);
      out << "wrote " << out_file->string() << "\n";
    } else {
      out << rendered;
    }
    return 0;
  });
}

}  // namespace skillopt
