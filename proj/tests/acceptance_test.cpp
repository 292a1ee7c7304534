// Release gate for the optimizer. Each criterion prints exactly one
// "PASS - ..." or "FAIL - ..." line; the process exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillopt/advisor.hpp"
#include "skillopt/commands.hpp"
#include "skillopt/errors.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/inner_refine.hpp"
#include "skillopt/manifest.hpp"
#include "skillopt/outer_search.hpp"
#include "skillopt/package_io.hpp"
#include "skillopt/skill_package.hpp"
#include "skillopt/structure_edits.hpp"
#include "skillopt/tokens.hpp"
#include "skillopt/tree_export.hpp"

using namespace skillopt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kRelTol = 1e-9;
constexpr double kExactTol = 1e-12;
constexpr int kOracleInputs = 1000;
constexpr int kSelectionDraws = 100000;
constexpr int kBackpropSeeds = 100;
constexpr int kGateTrials = 10000;
constexpr std::uint64_t kMixedConfigSeed = 0;

struct Checker {
  std::vector<std::string> failures;

  void require(bool ok, const std::string& message) {
    if (!ok) failures.push_back(message);
  }
};

fs::path fixtures() { return fs::path(FIXTURES_DIR); }

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "skillopt-acceptance" / name;
  fs::remove_all(dir);
  return dir;
}

bool close_rel(double got, long double want, double rel) {
  const long double diff = fabsl(static_cast<long double>(got) - want);
  return diff <= static_cast<long double>(rel) * std::max<long double>(1.0L, fabsl(want));
}

SearchTree star_tree(const std::vector<double>& means) {
  SearchTree tree;
  for (std::size_t i = 0; i < means.size(); ++i) {
    SearchNode n;
    n.id = i;
    if (i > 0) n.parent = 0;
    n.mean_reward = means[i];
    n.visit_count = 1;
    tree.nodes.push_back(std::move(n));
  }
  for (std::size_t i = 1; i < means.size(); ++i) tree.nodes[0].children.push_back(i);
  return tree;
}

long double ucb1_ref(long double mean, long double visits, long double total,
                     long double c) {
  return mean + c * sqrtl(logl(total) / visits);
}

std::vector<long double> mixed_ref(const std::vector<long double>& means,
                                   long double lambda, long double alpha) {
  const std::size_t n = means.size();
  long double mu = 0.0L;
  for (const auto q : means) mu += q;
  mu /= static_cast<long double>(n);
  std::vector<long double> z(n);
  long double hi = -1e30L;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = alpha * (means[i] - mu);
    hi = std::max(hi, z[i]);
  }
  long double denom = 0.0L;
  for (auto& v : z) {
    v = expl(v - hi);
    denom += v;
  }
  std::vector<long double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = lambda / static_cast<long double>(n) + (1.0L - lambda) * z[i] / denom;
  }
  return probs;
}

long double lcb_ref(const std::vector<long double>& xs, long double t) {
  const auto k = static_cast<long double>(xs.size());
  long double mean = 0.0L;
  for (const auto x : xs) mean += x;
  mean /= k;
  if (xs.size() < 2) return mean;
  long double var = 0.0L;
  for (const auto x : xs) var += (x - mean) * (x - mean);
  var /= (k - 1.0L);
  return mean - t * sqrtl(var) / sqrtl(k);
}

void criterion_formula_oracles(Checker& c) {
  c.require(std::abs(ucb1_score(0.5, 2, 10, 1.2) - 1.78757961577360834) <= kExactTol,
            "frozen ucb1 worked value drifted");
  {
    const auto tree = star_tree({0.2, 0.8});
    const auto probs = mixed_probabilities(tree, 0.25, 0.55);
    c.require(std::abs(probs[1] - 0.561319532631377180) <= kExactTol,
              "frozen mixed-policy worked value drifted");
  }
  c.require(std::abs(lcb({0.02, 0.04, 0.06}, 1.0) - 0.028452994616207485) <= kExactTol,
            "frozen lcb worked value drifted");

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < kOracleInputs; ++i) {
    const double mean = unit(rng);
    const std::size_t visits = 1 + rng() % 1000;
    const std::size_t total = visits + rng() % 9000;
    const double cexp = 3.0 * unit(rng);
    const double got = ucb1_score(mean, visits, total, cexp);
    const auto want = ucb1_ref(mean, static_cast<long double>(visits),
                               static_cast<long double>(total), cexp);
    if (!close_rel(got, want, kRelTol)) {
      c.require(false, "ucb1_score disagrees with the closed form at input " +
                           std::to_string(i));
      return;
    }
  }

  for (int i = 0; i < kOracleInputs; ++i) {
    const std::size_t n = 2 + rng() % 15;
    std::vector<double> means(n);
    std::vector<long double> wide(n);
    for (std::size_t j = 0; j < n; ++j) {
      means[j] = unit(rng);
      wide[j] = means[j];
    }
    const double lambda = unit(rng);
    const double alpha = 0.05 + 4.95 * unit(rng);
    const auto got = mixed_probabilities(star_tree(means), lambda, alpha);
    const auto want = mixed_ref(wide, lambda, alpha);
    for (std::size_t j = 0; j < n; ++j) {
      if (!close_rel(got[j], want[j], kRelTol)) {
        c.require(false, "mixed_probabilities disagrees with the closed form at input " +
                             std::to_string(i));
        return;
      }
    }
  }

  for (int i = 0; i < kOracleInputs; ++i) {
    const std::size_t k = 1 + rng() % 12;
    std::vector<double> deltas(k);
    std::vector<long double> wide(k);
    for (std::size_t j = 0; j < k; ++j) {
      deltas[j] = 0.4 * unit(rng) - 0.2;
      wide[j] = deltas[j];
    }
    const double t = 3.0 * unit(rng);
    if (!close_rel(lcb(deltas, t), lcb_ref(wide, t), kRelTol)) {
      c.require(false, "lcb disagrees with the closed form at input " + std::to_string(i));
      return;
    }
  }
}

void criterion_selection_laws(Checker& c) {
  {
    const auto tree = star_tree({0.1, 0.9, 0.3, 0.7, 0.5});
    const std::size_t n = tree.nodes.size();
    std::vector<int> counts(n, 0);
    std::mt19937_64 rng(1);
    for (int i = 0; i < kSelectionDraws; ++i) counts[select_mixed(tree, 1.0, 0.55, rng)]++;
    const double p = 1.0 / static_cast<double>(n);
    const double se = std::sqrt(p * (1.0 - p) / kSelectionDraws);
    for (std::size_t j = 0; j < n; ++j) {
      const double freq = static_cast<double>(counts[j]) / kSelectionDraws;
      c.require(std::abs(freq - p) <= 3.0 * se,
                "lambda=1 sampling is not uniform on node " + std::to_string(j));
    }
  }

  {
    const auto tree = star_tree({0.4, 0.4, 0.4, 0.4});
    const auto probs = mixed_probabilities(tree, 0.25, 0.55);
    for (const double p : probs) {
      c.require(std::abs(p - 0.25) <= kExactTol,
                "equal means should give equal mixed probabilities");
    }
    std::vector<int> counts(4, 0);
    std::mt19937_64 rng(2);
    for (int i = 0; i < kSelectionDraws; ++i) counts[select_mixed(tree, 0.25, 0.55, rng)]++;
    const double se = std::sqrt(0.25 * 0.75 / kSelectionDraws);
    for (std::size_t j = 0; j < 4; ++j) {
      const double freq = static_cast<double>(counts[j]) / kSelectionDraws;
      c.require(std::abs(freq - 0.25) <= 3.0 * se,
                "equal-mean sampling is not symmetric on node " + std::to_string(j));
    }
  }

  {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
      const std::size_t n = 1 + rng() % 12;
      std::vector<double> means(n);
      for (auto& m : means) m = 0.125 * static_cast<double>(rng() % 9);
      const auto tree = star_tree(means);
      std::size_t expected = 0;
      for (std::size_t j = 1; j < n; ++j) {
        if (means[j] > means[expected]) expected = j;
      }
      if (select_ucb1(tree, 0.0) != expected) {
        c.require(false, "c=0 selection is not argmax-mean with lowest-id ties at case " +
                             std::to_string(i));
        return;
      }
    }
  }
}

class RandomizedAdvisor : public Advisor {
public:
  explicit RandomizedAdvisor(std::uint64_t seed) : rng_(seed) {}

  std::string analyze(const Structure& structure, const std::string&, const Profile&,
                      const std::string&) override {
    current_ = structure;
    return "analysis";
  }

  std::string diagnose(const std::string&, const std::string&, const std::string&) override {
    return "diagnosis";
  }

  std::vector<EditAction> propose_actions(const std::string&,
                                          const std::vector<ActionTemplate>& catalog,
                                          const std::vector<std::string>&) override {
    for (int tries = 0; tries < 8 && !catalog.empty(); ++tries) {
      const auto& tpl = catalog[rng_() % catalog.size()];
      EditAction action;
      action.kind = tpl.kind;
      switch (tpl.kind) {
        case EditKind::add_section:
          action.params["heading"] = fresh("Section ");
          return {action};
        case EditKind::revise_description:
          return {action};
        case EditKind::add_reference:
          action.params["path"] = "references/" + fresh("r") + ".md";
          return {action};
        case EditKind::add_script:
          action.params["path"] = "scripts/" + fresh("s") + ".py";
          return {action};
        case EditKind::add_asset:
          action.params["path"] = "assets/" + fresh("a") + ".txt";
          return {action};
        case EditKind::remove_section:
          if (current_.section_headings.empty()) break;
          action.params["heading"] = pick(current_.section_headings);
          return {action};
        case EditKind::rename_section:
          if (current_.section_headings.empty()) break;
          action.params["from"] = pick(current_.section_headings);
          action.params["to"] = fresh("Renamed ");
          return {action};
        case EditKind::remove_reference:
          if (current_.reference_paths.empty()) break;
          action.params["path"] = pick(current_.reference_paths);
          return {action};
        case EditKind::remove_script:
          if (current_.script_paths.empty()) break;
          action.params["path"] = pick(current_.script_paths);
          return {action};
        case EditKind::remove_asset:
          if (current_.asset_paths.empty()) break;
          action.params["path"] = pick(current_.asset_paths);
          return {action};
        case EditKind::edit_metadata_keys:
          action.params["add"] = fresh("k");
          return {action};
        default:
          break;
      }
    }
    EditAction fallback;
    fallback.kind = EditKind::revise_description;
    return {fallback};
  }

  std::optional<ContentState> refine_variant(RefinementFamily, const ContentState&,
                                             const Structure&, const Profile&,
                                             const std::string&) override {
    return std::nullopt;
  }

protected:
  std::string complete(Stage, const std::string&, int) override { return ""; }

private:
  std::string fresh(const std::string& prefix) {
    return prefix + std::to_string(counter_++);
  }

  std::string pick(const std::vector<std::string>& options) {
    return options[rng_() % options.size()];
  }

  Structure current_;
  std::mt19937_64 rng_;
  int counter_ = 0;
};

void criterion_backprop_invariants(Checker& c) {
  const auto seed_pkg = parse_package(read_directory(fixtures() / "orqa-seed"));

  for (std::uint64_t seed = 0; seed < kBackpropSeeds; ++seed) {
    SyntheticLandscape landscape;
    landscape.base_reward = 0.5;
    landscape.noise_sd = 0.25;
    landscape.rng_seed = 1000 + seed;
    landscape.bonuses = {{"has_metadata_key:k1", 0.1}, {"section_count=5", 0.1}};
    SyntheticEvaluator evaluator(landscape);
    RandomizedAdvisor advisor(seed);

    SearchConfig config;
    config.max_rounds = static_cast<int>(1 + seed % 50);
    config.selection_policy = (seed % 2 == 1) ? SelectionPolicy::mixed : SelectionPolicy::ucb1;
    config.min_rounds_before_convergence = 0;
    config.stale_rounds_to_stop = 1000000;
    config.rng_seed = seed;

    const auto result = run_search(seed_pkg, config, advisor, evaluator);
    const auto& tree = result.tree;

    long double reward_sum = 0.0L;
    for (const auto& node : tree.nodes) reward_sum += node.reward_at_creation;
    const auto& root = tree.node(tree.root_id);
    const long double lhs =
        static_cast<long double>(root.mean_reward) * static_cast<long double>(root.visit_count);
    if (fabsl(lhs - reward_sum) > kExactTol * std::max<long double>(1.0L, fabsl(reward_sum))) {
      c.require(false, "root mean*visits != total creation reward at seed " +
                           std::to_string(seed));
      return;
    }

    for (const auto& node : tree.nodes) {
      std::size_t child_visits = 0;
      for (const auto child : node.children) child_visits += tree.node(child).visit_count;
      if (node.visit_count != 1 + child_visits) {
        c.require(false, "visit count is not 1 + children visits at seed " +
                             std::to_string(seed));
        return;
      }
    }
    if (root.visit_count != tree.nodes.size()) {
      c.require(false, "root visits != node count at seed " + std::to_string(seed));
      return;
    }
  }
}

void criterion_gate_calibration(Checker& c) {
  const struct {
    double t_crit;
    double nominal;
  } cases[] = {
      {0.0, 0.5},
      {1.0, 0.17171819806895677},
      {1.833, 0.05000897002529153},
  };
  const int k = 10;

  int case_index = 0;
  for (const auto& tc : cases) {
    std::mt19937_64 rng(123 + case_index);
    std::normal_distribution<double> noise(0.0, 0.03);
    int passes = 0;
    for (int trial = 0; trial < kGateTrials; ++trial) {
      std::vector<double> deltas(k);
      for (auto& d : deltas) d = noise(rng);
      if (lcb(deltas, tc.t_crit) >= 0.0) ++passes;
    }
    const double rate = static_cast<double>(passes) / kGateTrials;
    const double se = std::sqrt(tc.nominal * (1.0 - tc.nominal) / kGateTrials);
    c.require(rate <= tc.nominal + 3.0 * se,
              "gate passes too often under pure noise at t_crit " +
                  std::to_string(tc.t_crit));
    c.require(std::abs(rate - tc.nominal) <= 3.0 * se,
              "gate pass rate is off the nominal level at t_crit " +
                  std::to_string(tc.t_crit));
    ++case_index;
  }
}

struct OracleState {
  Structure structure;
  ContentState content;
};

std::optional<OracleState> oracle_apply(const OracleState& state,
                                        const std::vector<EditAction>& actions) {
  try {
    const auto outcome = apply_composite(state.structure, actions);
    OracleState next;
    next.structure = outcome.structure;
    next.content = align_content(state.content, state.structure, outcome.structure,
                                 outcome.note);
    return next;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void criterion_search_equals_enumeration(Checker& c) {
  const auto seed_pkg = parse_package(read_directory(fixtures() / "orqa-seed"));
  const auto landscape = load_landscape(fixtures() / "landscape.json");
  c.require(landscape.noise_sd == 0.0, "equivalence landscape must be noiseless");

  const auto playbook = json::parse(read_file(fixtures() / "playbook.json"));
  std::vector<std::vector<EditAction>> proposals;
  for (const auto& round : playbook.at("rounds")) {
    proposals.push_back(parse_proposal_text(round.at("proposal").get<std::string>()));
  }

  OracleState root;
  root.structure = derive_structure(seed_pkg);
  root.content = extract_content(seed_pkg, root.structure);
  const auto score = [&](const OracleState& s) {
    return synth_evaluate(s.structure, s.content, landscape, 0);
  };

  double r_star = score(root);
  for (const auto& first : proposals) {
    const auto after_one = oracle_apply(root, first);
    if (!after_one) continue;
    r_star = std::max(r_star, score(*after_one));
    for (const auto& second : proposals) {
      const auto after_two = oracle_apply(*after_one, second);
      if (!after_two) continue;
      r_star = std::max(r_star, score(*after_two));
    }
  }
  c.require(std::abs(r_star - 0.95) <= kExactTol,
            "enumeration oracle no longer finds the planted optimum");

  const struct {
    const char* manifest;
    std::uint64_t rng_seed;
  } runs[] = {
      {"config_a.json", 0},
      {"config_b.json", kMixedConfigSeed},
  };

  for (const auto& spec : runs) {
    auto manifest = load_manifest(fixtures() / spec.manifest);
    manifest.search.max_rounds = 6;
    manifest.search.rng_seed = spec.rng_seed;
    auto advisor = ScriptedAdvisor::from_file(manifest.advisor.arg);
    SyntheticEvaluator evaluator(load_landscape(manifest.evaluator.arg));

    const auto result = run_search(seed_pkg, manifest.search, advisor, evaluator,
                                   manifest.refinement);
    if (std::abs(result.best_reward - r_star) > kExactTol) {
      c.require(false, std::string(spec.manifest) +
                           " search reward differs from the enumeration oracle");
      continue;
    }

    const auto doc = tree_to_json(result.tree);
    const auto& path = doc.at("best_path");
    bool path_ok = !path.empty() && path.front() == doc.at("root") &&
                   path.back() == doc.at("best");
    for (std::size_t i = 0; path_ok && i + 1 < path.size(); ++i) {
      const auto& child = doc.at("nodes")[path[i + 1].get<std::size_t>()];
      path_ok = !child.at("parent").is_null() && child.at("parent") == path[i];
    }
    const auto& best_node = doc.at("nodes")[doc.at("best").get<std::size_t>()];
    path_ok = path_ok &&
              std::abs(best_node.at("reward").get<double>() - r_star) <= kExactTol;
    c.require(path_ok, std::string(spec.manifest) +
                           " tree export does not carry the winning path");
  }
}

DirectorySnapshot make_corpus_entry(int i) {
  std::ostringstream md;
  md << "---\n";
  md << "name: corpus-" << i << "\n";
  if (i % 3 == 0) {
    md << "description: >-\n  multi line description for corpus entry\n  number "
       << i << "\n";
  } else {
    md << "description: single line description for corpus entry " << i << "\n";
  }
  if (i % 2 == 0) md << "compatibility: designed for sandboxed shells\n";
  if (i % 2 == 1) md << "allowed-tools: [read_file, run_script]\n";
  if (i % 4 == 0) md << "allowed-tools:\n  - read_file\n  - search\n";
  if (i % 5 == 0) md << "category: mathematics\n";
  md << "---\n\n";
  if (i % 2 == 1) md << "Preamble paragraph before any heading, entry " << i << ".\n\n";
  const int sections = 1 + i % 4;
  for (int s = 0; s < sections; ++s) {
    md << "## Part " << (s + 1) << "\n\n";
    md << "Body text for part " << (s + 1) << " of entry " << i << ".\n";
    if (s == 0) md << "- first item\n- second item\n";
    if (s == 1 && i % 3 == 1) md << "\n```sh\nrun --with flags\n```\n";
    md << "\n";
  }

  DirectorySnapshot snapshot;
  snapshot["SKILL.md"] = md.str();
  if (i % 3 == 0) snapshot["references/notes-" + std::to_string(i) + ".md"] =
      "# Notes\n\ndetails for entry " + std::to_string(i) + "\n";
  if (i % 4 == 1) snapshot["scripts/tool.py"] = "print('entry " + std::to_string(i) + "')\n";
  if (i % 6 == 2) snapshot["assets/table.csv"] = "a,b\n1,2\n";
  return snapshot;
}

void criterion_parser_roundtrip(Checker& c) {
  std::vector<DirectorySnapshot> corpus;
  corpus.push_back(read_directory(fixtures() / "orqa-seed"));
  for (int i = 0; i < 19; ++i) corpus.push_back(make_corpus_entry(i));
  c.require(corpus.size() == 20, "corpus must hold 20 fixtures");
  c.require(corpus.front().size() == 2, "seed analog must span two files");

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto first = parse_package(corpus[i]);
    const auto serialized = serialize_package(first);
    const auto second = parse_package(serialized);
    if (!(second == first)) {
      c.require(false, "parse/serialize is not a fixpoint on corpus entry " +
                           std::to_string(i));
      return;
    }
    if (serialize_package(second) != serialized) {
      c.require(false, "serialization is unstable on corpus entry " + std::to_string(i));
      return;
    }
  }

  SkillPackage pkg;
  pkg.root_name = "budget-probe";
  pkg.frontmatter.name = "budget-probe";
  pkg.frontmatter.description = "boundary probe";
  pkg.frontmatter.key_order = {"name", "description"};
  pkg.body_sections = {{"Body", "w"}};
  const std::size_t base_words = count_words(serialize_skill_md(pkg));

  const auto with_words = [&](std::size_t target) {
    SkillPackage probe = pkg;
    std::string body = "w";
    for (std::size_t k = base_words; k < target; ++k) body += " w";
    probe.body_sections[0].second = body;
    return probe;
  };

  const struct {
    std::size_t words;
    std::size_t tokens;
    bool warns;
    bool errors;
  } boundaries[] = {
      {2625, 3500, false, false},
      {2626, 3502, true, false},
      {3750, 5000, true, false},
      {3751, 5002, true, true},
  };

  for (const auto& b : boundaries) {
    const auto probe = with_words(b.words);
    const auto text = serialize_skill_md(probe);
    if (count_words(text) != b.words || count_tokens(text) != b.tokens) {
      c.require(false, "token probe mis-calibrated at " + std::to_string(b.words) +
                           " words");
      return;
    }
    const auto report = validate(probe);
    c.require(report.activation_tokens == b.tokens,
              "validation token count mismatch at " + std::to_string(b.words) + " words");
    c.require(report.has_warning("BudgetWarning") == b.warns,
              "warning boundary wrong at " + std::to_string(b.tokens) + " tokens");
    c.require(report.has_error("BudgetExceeded") == b.errors,
              "error boundary wrong at " + std::to_string(b.tokens) + " tokens");
  }
}

void criterion_sweep_audit(Checker& c) {
  const std::vector<RunManifest> configs = {
      load_manifest(fixtures() / "sweep_a.json"),
      load_manifest(fixtures() / "sweep_b.json"),
  };
  const auto out_dir = scratch_dir("sweep");
  std::ostringstream out, err;
  const int code = cmd_sweep(configs, out_dir, out, err);
  c.require(code == 0, "sweep exited with " + std::to_string(code));
  if (code != 0) return;

  const auto report = json::parse(read_file(out_dir / "sweep_report.json"));
  c.require(report.at("schema_version") == 1, "unexpected sweep report schema");

  const auto& rows = report.at("configs");
  c.require(rows.size() == configs.size(), "sweep report must list every config");

  double best_confirm = -1.0;
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.at("status") != "ok") {
      c.require(false, "config " + std::to_string(i) + " did not finish");
      return;
    }
    for (const char* key :
         {"seed_reward", "search_best_reward", "confirm_reward", "rounds_run",
          "stop_reason"}) {
      c.require(row.contains(key),
                "config row " + std::to_string(i) + " lacks " + key);
    }
    c.require(!row.contains("test_reward"),
              "only the winner may receive a test evaluation");
    const double confirm = row.at("confirm_reward").get<double>();
    if (confirm > best_confirm) {
      best_confirm = confirm;
      best_index = i;
    }
  }

  const auto& winner = report.at("winner");
  c.require(!winner.is_null(), "sweep must declare a winner");
  if (winner.is_null()) return;
  c.require(winner.at("index").get<std::size_t>() == best_index,
            "winner is not the argmax of the confirm rewards");
  c.require(std::abs(winner.at("confirm_reward").get<double>() - best_confirm) <= kExactTol,
            "winner confirm reward mismatch");
  c.require(winner.at("name") == rows[best_index].at("name"), "winner name mismatch");

  const auto& test = report.at("test");
  c.require(test.size() == 3, "test block must hold exactly winner, seed and improvement");
  for (const char* key : {"winner_reward", "seed_reward", "improvement"}) {
    c.require(test.contains(key), std::string("test block lacks ") + key);
  }
  c.require(std::abs(test.at("improvement").get<double>() -
                     (test.at("winner_reward").get<double>() -
                      test.at("seed_reward").get<double>())) <= kExactTol,
            "test improvement is not winner minus seed");

  const auto& protocol = report.at("protocol");
  for (const char* key :
       {"search_phase", "confirm_phase", "selection_rule", "test_phase", "shared"}) {
    c.require(protocol.contains(key), std::string("protocol block lacks ") + key);
  }
  for (const char* key : {"evaluator", "dataset", "splits"}) {
    c.require(protocol.at("shared").contains(key),
              std::string("shared protocol lacks ") + key);
  }
}

struct Criterion {
  std::string label;
  double time_limit_seconds;
  std::function<void(Checker&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"formula oracles agree with independent closed forms", 5.0,
       criterion_formula_oracles},
      {"selection policy laws hold empirically", 30.0, criterion_selection_laws},
      {"backpropagation invariants hold on randomized runs", 60.0,
       criterion_backprop_invariants},
      {"refinement gate calibration stays at the nominal level", 30.0,
       criterion_gate_calibration},
      {"search reward equals exhaustive enumeration of short edit sequences", 60.0,
       criterion_search_equals_enumeration},
      {"parser round-trip is a fixpoint with exact budget boundaries", 5.0,
       criterion_parser_roundtrip},
      {"sweep protocol is auditable from its emitted report", 60.0,
       criterion_sweep_audit},
  };

  int failed = 0;
  for (const auto& criterion : criteria) {
    Checker checker;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(checker);
    } catch (const std::exception& e) {
      checker.failures.push_back(std::string("unexpected exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criterion.time_limit_seconds) {
      checker.failures.push_back("exceeded the " +
                                 std::to_string(criterion.time_limit_seconds) +
                                 "s budget");
    }
    std::ostringstream line;
    if (checker.failures.empty()) {
      line << "PASS - " << criterion.label;
    } else {
      ++failed;
      line << "FAIL - " << criterion.label << " (" << checker.failures.front();
      if (checker.failures.size() > 1) {
        line << " and " << checker.failures.size() - 1 << " more";
      }
      line << ")";
    }
    std::cout << line.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
