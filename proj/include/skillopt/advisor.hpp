#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillopt/refinement_family.hpp"
#include "skillopt/skill_package.hpp"
#include "skillopt/structure_edits.hpp"
#include "skillopt/tokens.hpp"

namespace skillopt {

/**
 * The advisor answers five kinds of staged queries: comprehend a seed package
 * into a profile, analyze a candidate, diagnose failure patterns, propose
 * structural actions from a catalog, and refine content within a family.
 *
 * Backends speak one constrained plain-text wire format, parsed here, so a
 * scripted playbook and a remote chat-completions model are interchangeable.
 * Every call is budgeted per stage, truncated when over budget, retried once
 * when unparseable, and recorded in an exchange log.
 */

enum class Stage {
  comprehension,
  analysis,
  diagnosis,
  proposal,
  inner_refinement,
};

const char* stage_name(Stage stage);

struct StageBudgets {
  TokenCount comprehension = 1024;
  TokenCount analysis = 1536;
  TokenCount diagnosis = 1024;
  TokenCount proposal = 20000;
  TokenCount inner_refinement = 1024;

  TokenCount budget_for(Stage stage) const;
};

// Seed understanding that steers the whole run: what the skill is for, what
// good looks like, and which edit kinds look most promising.
struct Profile {
  std::string task_summary;
  std::vector<std::string> success_criteria;
  std::vector<std::string> quality_dimensions;
  std::vector<std::string> promising_directions;
  std::optional<std::set<EditKind>> priority_action_kinds;
};

struct ComprehensionResult {
  Structure structure;
  ContentState content;
  Profile profile;
};

struct AdvisorExchange {
  Stage stage = Stage::comprehension;
  std::string prompt_digest;
  std::string response;
  TokenCount tokens_used = 0;
  int retries = 0;
  bool truncated = false;
};

// One bounded content edit, as parsed from an advisor response:
//   op: set_section | append_section | set_reference | set_script |
//       set_description | set_metadata_value | stop
//   heading: / path: / key:  <target>
//   text:
//   <verbatim payload until end of response>
struct RefineDirective {
  enum class Op {
    set_description,
    set_metadata_value,
    set_section,
    append_section,
    set_reference,
    set_script,
    stop,
  };
  Op op = Op::stop;
  std::string target;
  std::string text;
};

RefineDirective parse_refine_directive(const std::string& response);
bool family_allows(RefineDirective::Op op, RefinementFamily family);

// Applies a non-stop directive. Throws Error(bad_params) for unknown targets
// and Error(family_violation) when the edit would change structure (for
// example setting a frontmatter key the structure does not have).
ContentState apply_directive(const ContentState& content, const Structure& structure,
                             const RefineDirective& directive);

std::vector<EditAction> parse_proposal_text(const std::string& response);
Profile parse_profile_text(const std::string& response);

class Advisor {
public:
  explicit Advisor(StageBudgets budgets = {});
  virtual ~Advisor() = default;

  virtual ComprehensionResult comprehend(const SkillPackage& seed);
  virtual std::string analyze(const Structure& structure, const std::string& eval_summary,
                              const Profile& profile, const std::string& constraints);
  // The diagnosis carries the observed error patterns forward verbatim so the
  // proposal stage sees them.
  virtual std::string diagnose(const std::string& analysis,
                               const std::string& rich_diagnostics,
                               const std::string& search_experience);
  // Throws Error(out_of_catalog) when a well-formed proposal names a kind the
  // catalog does not offer, Error(advisor_failure) when the response stays
  // unparseable after one retry.
  virtual std::vector<EditAction> propose_actions(
      const std::string& diagnosis, const std::vector<ActionTemplate>& catalog,
      const std::vector<std::string>& warnings);
  // nullopt means the advisor declined to refine further (stop signal).
  virtual std::optional<ContentState> refine_variant(RefinementFamily family,
                                                     const ContentState& content,
                                                     const Structure& structure,
                                                     const Profile& profile,
                                                     const std::string& feedback);

  const std::vector<AdvisorExchange>& exchanges() const { return exchanges_; }
  const StageBudgets& budgets() const { return budgets_; }

protected:
  // Raw backend completion for one stage. attempt > 0 marks a reparse retry.
  virtual std::string complete(Stage stage, const std::string& prompt, int attempt) = 0;
  // Refinement calls carry the family so scripted backends can key on it.
  virtual std::string complete_refine(RefinementFamily family, const std::string& prompt,
                                      int attempt);

  // Runs one stage: completes, truncates to budget, logs the exchange. The
  // parse callback returns false to request the single retry.
  std::string run_stage(Stage stage, const std::string& prompt,
                        const std::function<bool(const std::string&)>& accept,
                        RefinementFamily family = RefinementFamily::instruction_text,
                        bool is_refine = false);

private:
  StageBudgets budgets_;
  std::vector<AdvisorExchange> exchanges_;
};

// Replays canned responses from a playbook JSON document:
//   {
//     "profile": "<comprehension response>",
//     "rounds": [{"analysis": "...", "diagnosis": "...", "proposal": "..."}, ...],
//     "refine": {"<FamilyName>": ["<directive response>", ...], ...}
//   }
// Proposal/analysis/diagnosis calls cycle through rounds modulo its length,
// so a playbook defines a closed universe of actions. Refinement responses
// are consumed sequentially per family; when a list runs out the advisor
// answers with a stop directive.
class ScriptedAdvisor : public Advisor {
public:
  explicit ScriptedAdvisor(nlohmann::json playbook, StageBudgets budgets = {});
  static ScriptedAdvisor from_file(const std::string& path, StageBudgets budgets = {});

protected:
  std::string complete(Stage stage, const std::string& prompt, int attempt) override;
  std::string complete_refine(RefinementFamily family, const std::string& prompt,
                              int attempt) override;

private:
  nlohmann::json playbook_;
  std::size_t analysis_calls_ = 0;
  std::size_t diagnosis_calls_ = 0;
  std::size_t proposal_calls_ = 0;
  std::map<std::string, std::size_t> refine_calls_;
};

struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  std::string model = "default";
  int transport_retries = 1;
  int timeout_seconds = 120;
};

// Talks to an OpenAI-style chat completions endpoint at
// {base_url}/v1/chat/completions with temperature 0 and the stage budget as
// max_tokens. Transport failures surface as Error(advisor_failure) after the
// configured retries.
class RemoteAdvisor : public Advisor {
public:
  explicit RemoteAdvisor(RemoteConfig config, StageBudgets budgets = {});
  // Reads ADVISOR_BASE_URL, ADVISOR_API_KEY and ADVISOR_MODEL.
  static RemoteAdvisor from_env(StageBudgets budgets = {});

protected:
  std::string complete(Stage stage, const std::string& prompt, int attempt) override;

private:
  RemoteConfig config_;
};

}  // namespace skillopt
