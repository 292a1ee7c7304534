#include "skillopt/outer_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "skillopt/digest.hpp"
#include "skillopt/errors.hpp"
#include "skillopt/rng.hpp"
#include "text_util.hpp"

namespace skillopt {

const SearchNode& SearchTree::node(NodeId id) const {
  if (id >= nodes.size()) raise(errc::unknown_node, "node " + std::to_string(id));
  return nodes[id];
}

SearchNode& SearchTree::node(NodeId id) {
  if (id >= nodes.size()) raise(errc::unknown_node, "node " + std::to_string(id));
  return nodes[id];
}

std::size_t SearchTree::total_visits() const {
  std::size_t total = 0;
  for (const auto& n : nodes) total += n.visit_count;
  return total;
}

const char* policy_name(SelectionPolicy policy) {
  return policy == SelectionPolicy::ucb1 ? "ucb1" : "mixed";
}

std::optional<SelectionPolicy> policy_from_name(std::string_view name) {
  if (name == "ucb1") return SelectionPolicy::ucb1;
  if (name == "mixed") return SelectionPolicy::mixed;
  return std::nullopt;
}

void validate_search_config(const SearchConfig& config) {
  if (config.max_rounds < 1) {
    raise(errc::domain_error, "max_rounds must be at least 1");
  }
  if (config.min_rounds_before_convergence < 0 || config.stale_rounds_to_stop < 1) {
    raise(errc::domain_error, "convergence settings out of range");
  }
  if (config.improvement_threshold < 0.0) {
    raise(errc::domain_error, "improvement_threshold must be non-negative");
  }
  if (config.selection_policy == SelectionPolicy::ucb1 &&
      config.exploration_constant < 0.0) {
    raise(errc::domain_error, "exploration_constant must be non-negative");
  }
  if (config.selection_policy == SelectionPolicy::mixed) {
    if (config.lambda < 0.0 || config.lambda > 1.0) {
      raise(errc::domain_error, "lambda must lie in [0, 1]");
    }
    if (config.alpha <= 0.0) {
      raise(errc::domain_error, "alpha must be positive");
    }
  }
  if (config.composite_cap < 1) {
    raise(errc::domain_error, "composite_cap must be at least 1");
  }
}

double ucb1_score(double mean_reward, std::size_t visit_count, std::size_t total_visits,
                  double c) {
  if (visit_count < 1 || total_visits < 1) {
    raise(errc::domain_error, "ucb1 needs at least one visit");
  }
  if (c < 0.0) raise(errc::domain_error, "exploration constant must be non-negative");
  return mean_reward +
         c * std::sqrt(std::log(static_cast<double>(total_visits)) /
                       static_cast<double>(visit_count));
}

NodeId select_ucb1(const SearchTree& tree, double c) {
  if (tree.nodes.empty()) raise(errc::empty_tree, "cannot select from an empty tree");
  const std::size_t total = tree.total_visits();
  NodeId best = 0;
  double best_score = -1.0;
  bool first = true;
  for (const auto& n : tree.nodes) {
    const double score = ucb1_score(n.mean_reward, n.visit_count, total, c);
    if (first || score > best_score) {
      best = n.id;
      best_score = score;
      first = false;
    }
  }
  return best;
}

std::vector<double> mixed_probabilities(const SearchTree& tree, double lambda,
                                        double alpha) {
  if (tree.nodes.empty()) raise(errc::empty_tree, "cannot select from an empty tree");
  if (lambda < 0.0 || lambda > 1.0) raise(errc::domain_error, "lambda out of range");
  if (alpha <= 0.0) raise(errc::domain_error, "alpha must be positive");
  const std::size_t n = tree.nodes.size();
  double mean = 0.0;
  for (const auto& node : tree.nodes) mean += node.mean_reward;
  mean /= static_cast<double>(n);

  std::vector<double> weights(n);
  double max_exponent = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = alpha * (tree.nodes[i].mean_reward - mean);
    max_exponent = std::max(max_exponent, weights[i]);
  }
  double sum = 0.0;
  for (auto& w : weights) {
    w = std::exp(w - max_exponent);
    sum += w;
  }
  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = lambda / static_cast<double>(n) + (1.0 - lambda) * weights[i] / sum;
  }
  return probs;
}

NodeId select_mixed(const SearchTree& tree, double lambda, double alpha,
                    std::mt19937_64& rng) {
  const std::vector<double> probs = mixed_probabilities(tree, lambda, alpha);
  const double u = uniform_unit(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return tree.nodes[i].id;
  }
  return tree.nodes.back().id;
}

void backpropagate(SearchTree& tree, NodeId from, double reward) {
  NodeId id = from;
  while (true) {
    SearchNode& n = tree.node(id);
    n.visit_count += 1;
    n.mean_reward += (reward - n.mean_reward) / static_cast<double>(n.visit_count);
    if (!n.parent) break;
    id = *n.parent;
  }
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::none: return "none";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::stagnation: return "stagnation";
    case StopReason::no_valid_expansions: return "no_valid_expansions";
  }
  return "none";
}

StopReason check_termination(const SearchTree& tree, const SearchConfig& config,
                             int rounds_completed, int stale_rounds,
                             const std::optional<std::set<EditKind>>& whitelist) {
  if (rounds_completed >= config.max_rounds) return StopReason::budget_exhausted;
  if (rounds_completed >= config.min_rounds_before_convergence &&
      stale_rounds >= config.stale_rounds_to_stop) {
    return StopReason::stagnation;
  }
  bool any = false;
  for (const auto& n : tree.nodes) {
    if (!admissible_actions(n.structure, whitelist).empty()) {
      any = true;
      break;
    }
  }
  if (!any) return StopReason::no_valid_expansions;
  return StopReason::none;
}

namespace {

std::string policy_constraints(const BudgetPolicy& policy) {
  std::ostringstream out;
  out << "activation budget " << policy.activation_budget << " tokens (warn at "
      << policy.warning_threshold << "), package limit " << policy.max_package_bytes
      << " bytes";
  return out.str();
}

}  // namespace

ExpandResult expand(const SearchTree& tree, NodeId parent, Advisor& advisor,
                    const ExpandContext& ctx) {
  const SearchNode& node = tree.node(parent);
  if (!ctx.profile) raise(errc::domain_error, "expand needs a profile");

  const auto catalog = admissible_actions(node.structure, ctx.whitelist);
  if (catalog.empty()) {
    return RejectedProposal{"Inadmissible", "no admissible actions for this node"};
  }

  const std::string analysis =
      advisor.analyze(node.structure, ctx.eval_summary, *ctx.profile,
                      policy_constraints(ctx.policy));
  const std::string diagnosis =
      advisor.diagnose(analysis, node.diagnostics, ctx.search_experience);

  std::vector<EditAction> actions;
  try {
    actions = advisor.propose_actions(diagnosis, catalog, ctx.warnings);
  } catch (const Error& e) {
    if (e.code() == errc::out_of_catalog) {
      return RejectedProposal{"OutOfCatalog", e.what()};
    }
    throw;
  }

  EditOutcome outcome;
  try {
    outcome = apply_composite(node.structure, actions, ctx.composite_cap);
  } catch (const Error& e) {
    if (e.code() == errc::inadmissible_action) {
      return RejectedProposal{"Inadmissible", e.what()};
    }
    if (e.code() == errc::bad_params) {
      return RejectedProposal{"BadParams", e.what()};
    }
    throw;
  }

  ContentState aligned;
  try {
    aligned = align_content(node.content, node.structure, outcome.structure,
                            outcome.note);
  } catch (const Error& e) {
    if (e.code() == errc::bridge_failure) {
      return RejectedProposal{"BridgeFailure", e.what()};
    }
    throw;
  }

  const SkillPackage candidate = recompose(aligned, outcome.structure);
  const ValidationReport report = validate(candidate, ctx.policy);
  if (!report.valid) {
    return RejectedProposal{report.first_error_code(),
                            report.errors.front().message};
  }
  return ValidatedCandidate{std::move(outcome.structure), std::move(actions),
                            std::move(outcome.note)};
}

namespace {

std::string format_reward(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string experience_text(const std::vector<RoundRecord>& log) {
  std::vector<std::string> lines;
  const std::size_t from = log.size() > 3 ? log.size() - 3 : 0;
  for (std::size_t i = from; i < log.size(); ++i) {
    const RoundRecord& rec = log[i];
    std::ostringstream line;
    line << "round " << rec.round << ": node " << rec.selected;
    if (rec.accepted) {
      line << " + " << rec.action_label << " accepted, reward "
           << format_reward(rec.reward);
    } else {
      line << " rejected (" << rec.reject_reason << ")";
    }
    lines.push_back(line.str());
  }
  return detail::join(lines, "\n");
}

AttemptSummary summarize_attempt(const AttemptRecord& rec, const Structure& structure) {
  AttemptSummary s;
  s.attempt_index = rec.attempt_index;
  s.deltas = rec.deltas;
  s.mean_delta = rec.mean_delta;
  s.sample_sd = rec.sample_sd;
  s.lcb = rec.lcb;
  s.gate_passed = rec.gate_passed;
  s.confidence = rec.confidence;
  s.reward = rec.reward;
  s.has_content = rec.has_content;
  if (rec.has_content) {
    s.content_digest = hex_digest(serialize_skill_md(recompose(rec.content, structure)));
  }
  return s;
}

}  // namespace

SearchResult run_search(const SkillPackage& seed, const SearchConfig& config,
                        Advisor& advisor, Evaluator& evaluator,
                        const RefinementBudget& inner_budget,
                        const BudgetPolicy& policy) {
  validate_search_config(config);
  const ValidationReport seed_report = validate(seed, policy);
  if (!seed_report.valid) {
    raise(errc::seed_invalid, "seed package fails validation: " +
                                  seed_report.first_error_code() + " (" +
                                  seed_report.errors.front().message + ")");
  }

  const ComprehensionResult comp = advisor.comprehend(seed);
  std::optional<std::set<EditKind>> whitelist = config.action_whitelist;
  if (!whitelist && config.whitelist_from_profile) {
    whitelist = comp.profile.priority_action_kinds;
  }

  SearchResult result;
  result.profile = comp.profile;
  SearchTree& tree = result.tree;

  SearchNode root;
  root.id = 0;
  root.structure = comp.structure;
  root.content = comp.content;
  tree.nodes.push_back(std::move(root));

  DrawSequence draws;
  const EvalOutcome seed_outcome =
      evaluator.evaluate(tree.nodes[0].structure, tree.nodes[0].content, draws.take());
  tree.nodes[0].reward_at_creation = seed_outcome.reward;
  tree.nodes[0].diagnostics = seed_outcome.diagnostics;
  backpropagate(tree, 0, seed_outcome.reward);

  result.seed_reward = seed_outcome.reward;
  double best_reward = seed_outcome.reward;
  tree.best_id = 0;

  std::mt19937_64 rng(config.rng_seed);
  int stale_rounds = 0;
  std::vector<std::string> warnings;

  for (int round = 1;; ++round) {
    const StopReason reason =
        check_termination(tree, config, round - 1, stale_rounds, whitelist);
    if (reason != StopReason::none) {
      result.stop_reason = reason;
      break;
    }

    const NodeId selected =
        config.selection_policy == SelectionPolicy::ucb1
            ? select_ucb1(tree, config.exploration_constant)
            : select_mixed(tree, config.lambda, config.alpha, rng);

    ExpandContext ctx;
    ctx.profile = &result.profile;
    ctx.policy = policy;
    ctx.whitelist = whitelist;
    ctx.composite_cap = config.composite_cap;
    {
      std::ostringstream summary;
      summary << "selected node reward " << format_reward(
                     tree.node(selected).reward_at_creation)
              << "; best so far " << format_reward(best_reward) << "; tree has "
              << tree.nodes.size() << " nodes";
      ctx.eval_summary = summary.str();
    }
    ctx.search_experience = experience_text(result.round_log);
    ctx.warnings = warnings;

    RoundRecord rec;
    rec.round = round;
    rec.selected = selected;

    const ExpandResult expansion = expand(tree, selected, advisor, ctx);
    if (const auto* rejected = std::get_if<RejectedProposal>(&expansion)) {
      rec.accepted = false;
      rec.reject_reason = rejected->reason;
      rec.reject_message = rejected->message;
      ++stale_rounds;
      warnings.push_back("round " + std::to_string(round) + " proposal rejected (" +
                         rejected->reason + "): " + rejected->message);
      if (warnings.size() > 3) warnings.erase(warnings.begin());
      rec.best_reward_after = best_reward;
      rec.stale_rounds_after = stale_rounds;
      result.round_log.push_back(std::move(rec));
      result.rounds_run = round;
      continue;
    }

    const auto& candidate = std::get<ValidatedCandidate>(expansion);
    const SearchNode& parent = tree.node(selected);
    const ContentState aligned = align_content(parent.content, parent.structure,
                                               candidate.structure, candidate.note);
    const RefinementFamily family = dispatch_family(candidate.actions);
    const std::vector<AttemptRecord> attempts =
        refine(aligned, candidate.structure, family, advisor, result.profile,
               evaluator, draws, inner_budget, parent.reward_at_creation, policy);

    ContentState accepted_content;
    double accepted_reward = 0.0;
    std::string diagnostics;
    bool any_valid = false;
    for (const auto& a : attempts) any_valid = any_valid || a.has_content;
    if (any_valid) {
      const AttemptRecord& chosen = rank_and_select(attempts);
      accepted_content = chosen.content;
      accepted_reward = chosen.reward;
      diagnostics = chosen.diagnostics;
    } else {
      const EvalOutcome outcome =
          evaluator.evaluate(candidate.structure, aligned, draws.take());
      accepted_content = aligned;
      accepted_reward = outcome.reward;
      diagnostics = outcome.diagnostics;
    }

    SearchNode child;
    child.id = tree.nodes.size();
    child.parent = selected;
    child.structure = candidate.structure;
    child.content = std::move(accepted_content);
    child.producing_actions = candidate.actions;
    child.reward_at_creation = accepted_reward;
    child.diagnostics = diagnostics;
    const NodeId child_id = child.id;
    tree.nodes.push_back(std::move(child));
    tree.node(selected).children.push_back(child_id);
    backpropagate(tree, child_id, accepted_reward);

    double improvement = 0.0;
    if (accepted_reward > best_reward) {
      improvement = accepted_reward - best_reward;
      best_reward = accepted_reward;
      tree.best_id = child_id;
    }
    stale_rounds = improvement < config.improvement_threshold ? stale_rounds + 1 : 0;

    rec.accepted = true;
    rec.action_label = actions_label(candidate.actions);
    rec.new_node = child_id;
    rec.reward = accepted_reward;
    rec.best_reward_after = best_reward;
    rec.stale_rounds_after = stale_rounds;
    for (const auto& a : attempts) {
      rec.attempts.push_back(summarize_attempt(a, candidate.structure));
    }
    result.round_log.push_back(std::move(rec));
    result.rounds_run = round;
  }

  const SearchNode& best = tree.node(tree.best_id);
  result.best_structure = best.structure;
  result.best_content = best.content;
  result.best_reward = best_reward;
  return result;
}

}  // namespace skillopt
