#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skillopt/advisor.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/refinement_family.hpp"
#include "skillopt/structure_edits.hpp"

namespace skillopt {

/**
 * Bounded content refinement under a fixed structure. After a structural edit,
 * align_content bridges the old content onto the new skeleton; refine then
 * runs a short sequence of advisor-guided attempts, each scored against the
 * pre-edit baseline and gated by a lower confidence bound on its deltas.
 */

// Placeholder content the bridge installs for components an edit created.
inline constexpr const char* kSectionStub = "(content pending)";
inline constexpr const char* kReferenceStub = "(reference pending)";
inline constexpr const char* kScriptStub = "# placeholder\n";
inline constexpr const char* kMetadataStub = "tbd";

// Monotone counter handing out evaluator draw indices, so every reward
// measurement in a run has a distinct, reproducible index.
struct DrawSequence {
  std::int64_t next = 0;
  std::int64_t take() { return next++; }
};

struct RefinementBudget {
  int max_attempts = 2;
  double t_crit = 1.833;
  int variants_per_attempt = 2;
};

struct AttemptRecord {
  int attempt_index = 0;
  ContentState content;
  // False when every variant of the attempt was invalid; such records carry
  // no deltas and never rank.
  bool has_content = true;
  std::vector<double> deltas;
  double mean_delta = 0.0;
  double sample_sd = 0.0;
  double lcb = 0.0;
  bool gate_passed = false;
  double confidence = 0.0;
  double reward = 0.0;
  std::string diagnostics;
};

// Maps old content onto new_structure using the carried note: renamed
// sections keep their text, inlined references flow into their target
// section, extracted sections leave a pointer behind, and newly created
// components receive stubs. Throws Error(bridge_failure) when the note names
// components the structures do not have.
ContentState align_content(const ContentState& old_content, const Structure& old_structure,
                           const Structure& new_structure, const CarriedNote& note);

RefinementFamily dispatch_family(const EditAction& action);
// Composites dispatch to the highest-priority family of any member:
// ScriptEdit > Redistribution > InstructionText > MetadataRoutingText >
// MetadataLight.
RefinementFamily dispatch_family(const std::vector<EditAction>& composite);

double sample_stddev(const std::vector<double>& xs);

// mean(deltas) - t_crit * sd / sqrt(k); a single delta has sd 0 and is its
// own bound. Throws Error(empty_deltas) for an empty list.
double lcb(const std::vector<double>& deltas, double t_crit);

// True when every component that differs between the two contents is inside
// the family's editable set.
bool family_allows_edit(const ContentState& before, const ContentState& after,
                        RefinementFamily family);

// Runs up to budget.max_attempts attempts of up to variants_per_attempt
// advisor variants each. Invalid variants (structure-incompatible, failing
// validation, or outside the family) are discarded; an advisor stop signal
// ends refinement early. Deltas are measured against baseline_reward.
std::vector<AttemptRecord> refine(const ContentState& aligned, const Structure& structure,
                                  RefinementFamily family, Advisor& advisor,
                                  const Profile& profile, Evaluator& evaluator,
                                  DrawSequence& draws, const RefinementBudget& budget,
                                  double baseline_reward, const BudgetPolicy& policy = {});

// Orders by gate passed, then mean delta, then confidence, then earliest
// attempt. Throws Error(no_valid_attempts) when nothing has content.
const AttemptRecord& rank_and_select(const std::vector<AttemptRecord>& records);

}  // namespace skillopt
