#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "skillopt/advisor.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/inner_refine.hpp"
#include "skillopt/structure_edits.hpp"

namespace skillopt {

/**
 * Outer tree search over package structures. Every node holds a full
 * (structure, content) pair plus running visit statistics; expansion asks the
 * advisor for a composite edit, gates it, bridges content across, refines it
 * with the inner loop, and backpropagates the accepted reward along the path
 * to the root. Any node may be selected for expansion, not just leaves.
 */

using NodeId = std::size_t;

struct SearchNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  Structure structure;
  ContentState content;
  std::size_t visit_count = 0;
  double mean_reward = 0.0;
  std::vector<EditAction> producing_actions;
  double reward_at_creation = 0.0;
  std::string diagnostics;
};

struct SearchTree {
  std::vector<SearchNode> nodes;
  NodeId root_id = 0;
  NodeId best_id = 0;

  const SearchNode& node(NodeId id) const;
  SearchNode& node(NodeId id);
  std::size_t total_visits() const;
};

enum class SelectionPolicy { ucb1, mixed };
const char* policy_name(SelectionPolicy policy);
std::optional<SelectionPolicy> policy_from_name(std::string_view name);

struct SearchConfig {
  int max_rounds = 3;
  SelectionPolicy selection_policy = SelectionPolicy::ucb1;
  double exploration_constant = 1.2;
  double alpha = 0.55;
  double lambda = 0.25;
  int min_rounds_before_convergence = 2;
  int stale_rounds_to_stop = 2;
  double improvement_threshold = 0.001;
  std::optional<std::set<EditKind>> action_whitelist;
  // When set and no explicit whitelist is given, enforce the comprehension
  // profile's priority kinds as the whitelist.
  bool whitelist_from_profile = false;
  std::uint64_t rng_seed = 0;
  std::size_t composite_cap = 3;
};

// Throws Error(domain_error) on out-of-range parameters.
void validate_search_config(const SearchConfig& config);

// mean + c * sqrt(ln(total_visits) / visit_count); total counts visits over
// the whole tree.
double ucb1_score(double mean_reward, std::size_t visit_count, std::size_t total_visits,
                  double c);

// Highest UCB1 score wins, lowest id on ties.
NodeId select_ucb1(const SearchTree& tree, double c);

// P(n) = lambda/|N| + (1-lambda) * softmax(alpha * (Q(n) - mean Q)), indexed
// by node id.
std::vector<double> mixed_probabilities(const SearchTree& tree, double lambda,
                                        double alpha);
NodeId select_mixed(const SearchTree& tree, double lambda, double alpha,
                    std::mt19937_64& rng);

// Increments visit counts and folds the reward into the running means on
// every node from `from` up to the root, inclusive.
void backpropagate(SearchTree& tree, NodeId from, double reward);

enum class StopReason { none, budget_exhausted, stagnation, no_valid_expansions };
const char* stop_reason_name(StopReason reason);

StopReason check_termination(const SearchTree& tree, const SearchConfig& config,
                             int rounds_completed, int stale_rounds,
                             const std::optional<std::set<EditKind>>& whitelist);

struct ValidatedCandidate {
  Structure structure;
  std::vector<EditAction> actions;
  CarriedNote note;
};

struct RejectedProposal {
  std::string reason;
  std::string message;
};

using ExpandResult = std::variant<ValidatedCandidate, RejectedProposal>;

struct ExpandContext {
  const Profile* profile = nullptr;
  BudgetPolicy policy;
  std::optional<std::set<EditKind>> whitelist;
  std::size_t composite_cap = 3;
  std::string eval_summary;
  std::string search_experience;
  std::vector<std::string> warnings;
};

// Advisor-guided expansion of one node: analyze, diagnose, propose, apply the
// composite, bridge the content and gate the result. Proposal problems come
// back as RejectedProposal (reason codes: Inadmissible, OutOfCatalog,
// BadParams, BridgeFailure, or the first validation error code such as
// BudgetExceeded); advisor and evaluator failures propagate as exceptions.
ExpandResult expand(const SearchTree& tree, NodeId parent, Advisor& advisor,
                    const ExpandContext& ctx);

struct AttemptSummary {
  int attempt_index = 0;
  std::vector<double> deltas;
  double mean_delta = 0.0;
  double sample_sd = 0.0;
  double lcb = 0.0;
  bool gate_passed = false;
  double confidence = 0.0;
  double reward = 0.0;
  bool has_content = true;
  std::string content_digest;
};

struct RoundRecord {
  int round = 0;
  NodeId selected = 0;
  bool accepted = false;
  std::string action_label;
  std::string reject_reason;
  std::string reject_message;
  NodeId new_node = 0;
  double reward = 0.0;
  double best_reward_after = 0.0;
  int stale_rounds_after = 0;
  std::vector<AttemptSummary> attempts;
};

struct SearchResult {
  Structure best_structure;
  ContentState best_content;
  double best_reward = 0.0;
  double seed_reward = 0.0;
  SearchTree tree;
  std::vector<RoundRecord> round_log;
  StopReason stop_reason = StopReason::none;
  int rounds_run = 0;
  Profile profile;
};

/// Full optimization run: validate the seed, comprehend it, evaluate the root
// once, then rounds of select / expand / refine / backpropagate until a
// termination condition fires. Deterministic for fixed seed, config, advisor
// and evaluator. Throws Error(seed_invalid) when the seed fails validation.
SearchResult run_search(const SkillPackage& seed, const SearchConfig& config,
                        Advisor& advisor, Evaluator& evaluator,
                        const RefinementBudget& inner_budget = {},
                        const BudgetPolicy& policy = {});

}  // namespace skillopt
