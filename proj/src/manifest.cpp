#include "skillopt/manifest.hpp"

#include <fstream>
#include <set>
#include <vector>

#include <json.hpp>

#include "skillopt/errors.hpp"
#include "skillopt/structure_edits.hpp"

namespace skillopt {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& context, const std::string& detail) {
  raise(errc::bad_manifest, context + ": " + detail);
}

void require_keys(const json& obj, const std::string& context,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) bad(context, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      bad(context, "unknown key '" + it.key() + "'");
    }
  }
}

double read_number(const json& obj, const std::string& context, const std::string& key,
                   double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) bad(context, "'" + key + "' must be a number");
  return it->get<double>();
}

std::int64_t read_int(const json& obj, const std::string& context, const std::string& key,
                      std::int64_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) bad(context, "'" + key + "' must be an integer");
  return it->get<std::int64_t>();
}

std::string read_string(const json& obj, const std::string& context, const std::string& key,
                        const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) bad(context, "'" + key + "' must be a string");
  return it->get<std::string>();
}

std::size_t read_size(const json& obj, const std::string& context, const std::string& key,
                      std::size_t fallback) {
  std::int64_t v = read_int(obj, context, key, static_cast<std::int64_t>(fallback));
  if (v < 0) bad(context, "'" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

BackendSpec parse_backend(const std::string& text, const std::string& context,
                          const std::set<std::string>& kinds) {
  BackendSpec spec;
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    spec.kind = text;
  } else {
    spec.kind = text.substr(0, colon);
    spec.arg = text.substr(colon + 1);
  }
  if (kinds.find(spec.kind) == kinds.end()) {
    bad(context, "unknown backend '" + spec.kind + "'");
  }
  return spec;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  return base / p;
}

void parse_search(const json& obj, SearchConfig& cfg) {
  const std::string ctx = "search";
  require_keys(obj, ctx,
               {"max_rounds", "selection_policy", "exploration_constant", "alpha", "lambda",
                "min_rounds_before_convergence", "stale_rounds_to_stop",
                "improvement_threshold", "action_whitelist", "rng_seed", "composite_cap"});
  cfg.max_rounds = static_cast<int>(read_int(obj, ctx, "max_rounds", cfg.max_rounds));
  std::string policy =
      read_string(obj, ctx, "selection_policy", policy_name(cfg.selection_policy));
  auto parsed_policy = policy_from_name(policy);
  if (!parsed_policy) bad(ctx, "unknown selection_policy '" + policy + "'");
  cfg.selection_policy = *parsed_policy;
  cfg.exploration_constant =
      read_number(obj, ctx, "exploration_constant", cfg.exploration_constant);
  cfg.alpha = read_number(obj, ctx, "alpha", cfg.alpha);
  cfg.lambda = read_number(obj, ctx, "lambda", cfg.lambda);
  cfg.min_rounds_before_convergence = static_cast<int>(
      read_int(obj, ctx, "min_rounds_before_convergence", cfg.min_rounds_before_convergence));
  cfg.stale_rounds_to_stop =
      static_cast<int>(read_int(obj, ctx, "stale_rounds_to_stop", cfg.stale_rounds_to_stop));
  cfg.improvement_threshold =
      read_number(obj, ctx, "improvement_threshold", cfg.improvement_threshold);
  cfg.rng_seed = static_cast<std::uint64_t>(
      read_int(obj, ctx, "rng_seed", static_cast<std::int64_t>(cfg.rng_seed)));
  cfg.composite_cap =
      read_size(obj, ctx, "composite_cap", cfg.composite_cap);
  auto wl = obj.find("action_whitelist");
  if (wl != obj.end()) {
    if (wl->is_string()) {
      if (wl->get<std::string>() != "profile") {
        bad(ctx, "'action_whitelist' string form must be \"profile\"");
      }
      cfg.whitelist_from_profile = true;
    } else if (wl->is_array()) {
      std::set<EditKind> kinds;
      for (const auto& item : *wl) {
        if (!item.is_string()) bad(ctx, "'action_whitelist' entries must be strings");
        auto kind = kind_from_name(item.get<std::string>());
        if (!kind) bad(ctx, "unknown action kind '" + item.get<std::string>() + "'");
        kinds.insert(*kind);
      }
      cfg.action_whitelist = std::move(kinds);
    } else {
      bad(ctx, "'action_whitelist' must be \"profile\" or an array of action names");
    }
  }
}

void parse_refinement(const json& obj, RefinementBudget& b) {
  const std::string ctx = "refinement";
  require_keys(obj, ctx, {"max_attempts", "t_crit", "variants_per_attempt"});
  b.max_attempts = static_cast<int>(read_int(obj, ctx, "max_attempts", b.max_attempts));
  b.t_crit = read_number(obj, ctx, "t_crit", b.t_crit);
  b.variants_per_attempt =
      static_cast<int>(read_int(obj, ctx, "variants_per_attempt", b.variants_per_attempt));
}

void parse_stage_budgets(const json& obj, StageBudgets& b) {
  const std::string ctx = "stage_budgets";
  require_keys(obj, ctx,
               {"comprehension", "analysis", "diagnosis", "proposal", "inner_refinement"});
  b.comprehension = read_size(obj, ctx, "comprehension", b.comprehension);
  b.analysis = read_size(obj, ctx, "analysis", b.analysis);
  b.diagnosis = read_size(obj, ctx, "diagnosis", b.diagnosis);
  b.proposal = read_size(obj, ctx, "proposal", b.proposal);
  b.inner_refinement = read_size(obj, ctx, "inner_refinement", b.inner_refinement);
}

void parse_budget_policy(const json& obj, BudgetPolicy& p) {
  const std::string ctx = "budget_policy";
  require_keys(obj, ctx, {"activation_budget", "warning_threshold", "max_package_bytes"});
  p.activation_budget = read_size(obj, ctx, "activation_budget", p.activation_budget);
  p.warning_threshold = read_size(obj, ctx, "warning_threshold", p.warning_threshold);
  p.max_package_bytes = read_size(obj, ctx, "max_package_bytes", p.max_package_bytes);
}

void parse_splits(const json& obj, SplitSpec& s) {
  const std::string ctx = "splits";
  require_keys(obj, ctx, {"search", "confirm", "test", "seed"});
  s.n_search = read_size(obj, ctx, "search", s.n_search);
  s.n_confirm = read_size(obj, ctx, "confirm", s.n_confirm);
  s.n_test = read_size(obj, ctx, "test", s.n_test);
  s.seed = static_cast<std::uint64_t>(
      read_int(obj, ctx, "seed", static_cast<std::int64_t>(s.seed)));
}

}  // namespace

BackendSpec parse_advisor_spec(const std::string& text) {
  return parse_backend(text, "advisor", {"scripted", "remote"});
}

BackendSpec parse_evaluator_spec(const std::string& text) {
  return parse_backend(text, "evaluator", {"synthetic", "exact-match"});
}

RunManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) raise(errc::io_error, "cannot open manifest " + file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(errc::io_error, "cannot parse manifest " + file.string() + ": " + e.what());
  }
  const std::string ctx = "manifest";
  require_keys(doc, ctx,
               {"name", "skill", "search", "refinement", "stage_budgets", "budget_policy",
                "dataset", "splits", "advisor", "evaluator", "output_dir"});

  RunManifest m;
  std::filesystem::path base = file.parent_path();
  m.name = read_string(doc, ctx, "name", file.stem().string());

  std::string skill = read_string(doc, ctx, "skill", "");
  if (skill.empty()) bad(ctx, "'skill' is required");
  m.skill_dir = resolve(base, skill);

  if (auto it = doc.find("search"); it != doc.end()) parse_search(*it, m.search);
  if (auto it = doc.find("refinement"); it != doc.end()) parse_refinement(*it, m.refinement);
  if (auto it = doc.find("stage_budgets"); it != doc.end())
    parse_stage_budgets(*it, m.stage_budgets);
  if (auto it = doc.find("budget_policy"); it != doc.end())
    parse_budget_policy(*it, m.budget_policy);
  if (auto it = doc.find("splits"); it != doc.end()) parse_splits(*it, m.splits);

  std::string dataset = read_string(doc, ctx, "dataset", "");
  if (!dataset.empty()) m.dataset = resolve(base, dataset);

  m.advisor = parse_backend(read_string(doc, ctx, "advisor", "scripted"), "advisor",
                            {"scripted", "remote"});
  if (m.advisor.kind == "scripted") {
    if (m.advisor.arg.empty()) bad("advisor", "scripted advisor needs a playbook path");
    m.advisor.arg = resolve(base, m.advisor.arg).string();
  }

  m.evaluator = parse_backend(read_string(doc, ctx, "evaluator", "synthetic"), "evaluator",
                              {"synthetic", "exact-match"});
  if (m.evaluator.kind == "synthetic") {
    if (m.evaluator.arg.empty()) bad("evaluator", "synthetic evaluator needs a landscape path");
    m.evaluator.arg = resolve(base, m.evaluator.arg).string();
  } else {
    if (m.evaluator.arg.empty()) bad("evaluator", "exact-match evaluator needs a runner command");
    if (!m.dataset) bad("evaluator", "exact-match evaluator needs a dataset");
    if (m.splits.n_search == 0 || m.splits.n_confirm == 0 || m.splits.n_test == 0) {
      bad("evaluator", "exact-match evaluator needs non-empty search/confirm/test splits");
    }
  }

  std::string out = read_string(doc, ctx, "output_dir", "");
  if (out.empty()) bad(ctx, "'output_dir' is required");
  m.output_dir = resolve(base, out);

  try {
    validate_search_config(m.search);
  } catch (const Error& e) {
    bad("search", e.what());
  }
  if (m.refinement.max_attempts < 1) bad("refinement", "'max_attempts' must be at least 1");
  if (m.refinement.variants_per_attempt < 1) {
    bad("refinement", "'variants_per_attempt' must be at least 1");
  }
  if (m.refinement.t_crit < 0.0) bad("refinement", "'t_crit' must be non-negative");
  return m;
}

}  // namespace skillopt
