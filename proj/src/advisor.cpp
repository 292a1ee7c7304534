#include "skillopt/advisor.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "skillopt/digest.hpp"
#include "skillopt/errors.hpp"
#include "skillopt/package_io.hpp"
#include "text_util.hpp"

namespace skillopt {

using nlohmann::json;

const char* family_name(RefinementFamily family) {
  switch (family) {
    case RefinementFamily::metadata_light: return "MetadataLight";
    case RefinementFamily::metadata_routing_text: return "MetadataRoutingText";
    case RefinementFamily::instruction_text: return "InstructionText";
    case RefinementFamily::redistribution: return "Redistribution";
    case RefinementFamily::script_edit: return "ScriptEdit";
  }
  return "InstructionText";
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::comprehension: return "comprehension";
    case Stage::analysis: return "analysis";
    case Stage::diagnosis: return "diagnosis";
    case Stage::proposal: return "proposal";
    case Stage::inner_refinement: return "inner_refinement";
  }
  return "comprehension";
}

TokenCount StageBudgets::budget_for(Stage stage) const {
  switch (stage) {
    case Stage::comprehension: return comprehension;
    case Stage::analysis: return analysis;
    case Stage::diagnosis: return diagnosis;
    case Stage::proposal: return proposal;
    case Stage::inner_refinement: return inner_refinement;
  }
  return comprehension;
}

namespace {

constexpr const char* kPromptVersion = "v1";

const char* op_name(RefineDirective::Op op) {
  switch (op) {
    case RefineDirective::Op::set_description: return "set_description";
    case RefineDirective::Op::set_metadata_value: return "set_metadata_value";
    case RefineDirective::Op::set_section: return "set_section";
    case RefineDirective::Op::append_section: return "append_section";
    case RefineDirective::Op::set_reference: return "set_reference";
    case RefineDirective::Op::set_script: return "set_script";
    case RefineDirective::Op::stop: return "stop";
  }
  return "stop";
}

std::optional<RefineDirective::Op> op_from_name(std::string_view name) {
  for (auto op : {RefineDirective::Op::set_description,
                  RefineDirective::Op::set_metadata_value,
                  RefineDirective::Op::set_section, RefineDirective::Op::append_section,
                  RefineDirective::Op::set_reference, RefineDirective::Op::set_script,
                  RefineDirective::Op::stop}) {
    if (name == op_name(op)) return op;
  }
  return std::nullopt;
}

std::string render_structure(const Structure& s) {
  std::ostringstream out;
  out << "sections:";
  for (const auto& h : s.section_headings) out << " [" << (h.empty() ? "(preamble)" : h) << "]";
  out << "\nreferences:";
  for (const auto& p : s.reference_paths) out << " " << p;
  out << "\nscripts:";
  for (const auto& p : s.script_paths) out << " " << p;
  out << "\nassets:";
  for (const auto& p : s.asset_paths) out << " " << p;
  out << "\nfrontmatter keys: " << detail::join(s.frontmatter_keys, ", ") << "\n";
  return out.str();
}

std::string excerpt(const std::string& text, std::size_t limit = 240) {
  if (text.size() <= limit) return text;
  return text.substr(0, limit) + "...";
}

std::string render_content(const ContentState& c) {
  std::ostringstream out;
  out << "description: " << c.frontmatter.description << "\n";
  for (const auto& [heading, body] : c.section_bodies) {
    out << "section [" << (heading.empty() ? "(preamble)" : heading)
        << "]: " << excerpt(body) << "\n";
  }
  for (const auto& [path, text] : c.reference_texts) {
    out << "reference " << path << ": " << excerpt(text) << "\n";
  }
  for (const auto& [path, text] : c.script_texts) {
    out << "script " << path << ": " << excerpt(text) << "\n";
  }
  return out.str();
}

std::string render_profile(const Profile& p) {
  std::ostringstream out;
  out << "task: " << p.task_summary << "\n";
  if (!p.success_criteria.empty()) {
    out << "success criteria: " << detail::join(p.success_criteria, "; ") << "\n";
  }
  if (!p.quality_dimensions.empty()) {
    out << "quality dimensions: " << detail::join(p.quality_dimensions, "; ") << "\n";
  }
  if (!p.promising_directions.empty()) {
    out << "promising directions: " << detail::join(p.promising_directions, "; ") << "\n";
  }
  return out.str();
}

bool scalar_label(const std::string& line, const char* label, std::string& value) {
  const std::string prefix = std::string(label) + ":";
  if (line.rfind(prefix, 0) != 0) return false;
  value = std::string(detail::strip(std::string_view(line).substr(prefix.size())));
  return true;
}

}  // namespace

Profile parse_profile_text(const std::string& response) {
  Profile profile;
  std::vector<std::string>* list = nullptr;
  for (const auto& line : detail::split_lines(response)) {
    if (detail::is_blank(line)) continue;
    std::string value;
    if (scalar_label(line, "task_summary", value)) {
      profile.task_summary = value;
      list = nullptr;
    } else if (scalar_label(line, "success_criteria", value)) {
      list = &profile.success_criteria;
    } else if (scalar_label(line, "quality_dimensions", value)) {
      list = &profile.quality_dimensions;
    } else if (scalar_label(line, "promising_directions", value)) {
      list = &profile.promising_directions;
    } else if (scalar_label(line, "priority_action_kinds", value)) {
      list = nullptr;
      if (value.empty()) continue;
      std::set<EditKind> kinds;
      for (const auto& part : detail::split_on(value, ',')) {
        const auto name = detail::strip(part);
        if (name.empty()) continue;
        const auto kind = kind_from_name(name);
        if (!kind) {
          raise(errc::advisor_failure,
                "unknown action kind '" + std::string(name) + "' in profile");
        }
        kinds.insert(*kind);
      }
      if (!kinds.empty()) profile.priority_action_kinds = kinds;
    } else if (list && detail::lstrip(line).rfind("- ", 0) == 0) {
      list->push_back(std::string(detail::strip(detail::lstrip(line).substr(2))));
    } else {
      list = nullptr;
    }
  }
  return profile;
}

std::vector<EditAction> parse_proposal_text(const std::string& response) {
  std::vector<std::vector<std::string>> blocks(1);
  for (const auto& line : detail::split_lines(response)) {
    if (detail::strip(line) == "---") {
      blocks.emplace_back();
    } else {
      blocks.back().push_back(line);
    }
  }
  std::vector<EditAction> actions;
  for (const auto& block : blocks) {
    EditAction action;
    bool has_kind = false;
    for (const auto& line : block) {
      if (detail::is_blank(line)) continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos) {
        raise(errc::advisor_failure, "proposal line is not 'key: value': '" + line + "'");
      }
      const std::string key = std::string(detail::strip(std::string_view(line).substr(0, colon)));
      const std::string value =
          std::string(detail::strip(std::string_view(line).substr(colon + 1)));
      if (key == "action") {
        const auto kind = kind_from_name(value);
        if (!kind) {
          raise(errc::advisor_failure, "unknown action kind '" + value + "'");
        }
        action.kind = *kind;
        has_kind = true;
      } else if (key == "rationale") {
        action.rationale = value;
      } else {
        action.params[key] = value;
      }
    }
    if (!has_kind) {
      bool empty_block = true;
      for (const auto& line : block) {
        if (!detail::is_blank(line)) empty_block = false;
      }
      if (empty_block) continue;
      raise(errc::advisor_failure, "proposal block has no 'action:' line");
    }
    actions.push_back(std::move(action));
  }
  if (actions.empty()) {
    raise(errc::advisor_failure, "proposal response contains no actions");
  }
  return actions;
}

RefineDirective parse_refine_directive(const std::string& response) {
  const auto lines = detail::split_lines(response);
  RefineDirective d;
  bool have_op = false;
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    if (detail::is_blank(lines[i])) continue;
    std::string value;
    if (!scalar_label(lines[i], "op", value)) {
      raise(errc::advisor_failure, "refinement response must open with 'op:'");
    }
    const auto op = op_from_name(value);
    if (!op) raise(errc::advisor_failure, "unknown refinement op '" + value + "'");
    d.op = *op;
    have_op = true;
    ++i;
    break;
  }
  if (!have_op) raise(errc::advisor_failure, "empty refinement response");
  for (; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (detail::is_blank(line)) continue;
    std::string value;
    if (scalar_label(line, "heading", value) || scalar_label(line, "path", value) ||
        scalar_label(line, "key", value)) {
      d.target = value;
      continue;
    }
    if (line.rfind("text:", 0) == 0) {
      const auto inline_part = detail::strip(std::string_view(line).substr(5));
      std::vector<std::string> rest(lines.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                                    lines.end());
      if (!inline_part.empty()) {
        d.text = std::string(inline_part);
        if (!rest.empty()) d.text += "\n" + detail::join(rest, "\n");
      } else {
        d.text = detail::join(rest, "\n");
      }
      d.text = std::string(detail::rstrip(d.text));
      break;
    }
    raise(errc::advisor_failure, "unexpected refinement line '" + line + "'");
  }
  return d;
}

bool family_allows(RefineDirective::Op op, RefinementFamily family) {
  using Op = RefineDirective::Op;
  if (op == Op::stop) return true;
  switch (family) {
    case RefinementFamily::metadata_light:
      return op == Op::set_metadata_value;
    case RefinementFamily::metadata_routing_text:
      return op == Op::set_description;
    case RefinementFamily::instruction_text:
      return op == Op::set_section || op == Op::append_section;
    case RefinementFamily::redistribution:
      return op == Op::set_section || op == Op::append_section ||
             op == Op::set_reference;
    case RefinementFamily::script_edit:
      return op == Op::set_script;
  }
  return false;
}

ContentState apply_directive(const ContentState& content, const Structure& structure,
                             const RefineDirective& directive) {
  using Op = RefineDirective::Op;
  ContentState out = content;
  switch (directive.op) {
    case Op::set_description: {
      out.frontmatter.description = detail::collapse_ws(directive.text);
      break;
    }
    case Op::set_metadata_value: {
      const std::string key = normalize_key(directive.target);
      if (key == "name" || key == "description") {
        raise(errc::family_violation, "'" + key + "' cannot be edited as plain metadata");
      }
      if (!structure.has_key(key)) {
        raise(errc::family_violation,
              "setting key '" + key + "' would change the structure");
      }
      set_frontmatter_value(out.frontmatter, key, directive.text);
      break;
    }
    case Op::set_section:
    case Op::append_section: {
      const auto it = out.section_bodies.find(directive.target);
      if (it == out.section_bodies.end()) {
        raise(errc::bad_params, "unknown section '" + directive.target + "'");
      }
      if (directive.op == Op::set_section || it->second.empty()) {
        it->second = directive.text;
      } else {
        it->second += "\n" + directive.text;
      }
      break;
    }
    case Op::set_reference: {
      const auto it = out.reference_texts.find(directive.target);
      if (it == out.reference_texts.end()) {
        raise(errc::bad_params, "unknown reference '" + directive.target + "'");
      }
      it->second = directive.text;
      break;
    }
    case Op::set_script: {
      const auto it = out.script_texts.find(directive.target);
      if (it == out.script_texts.end()) {
        raise(errc::bad_params, "unknown script '" + directive.target + "'");
      }
      it->second = directive.text;
      break;
    }
    case Op::stop:
      raise(errc::domain_error, "stop directive cannot be applied");
  }
  return out;
}

Advisor::Advisor(StageBudgets budgets) : budgets_(budgets) {}

std::string Advisor::complete_refine(RefinementFamily /*family*/,
                                     const std::string& prompt, int attempt) {
  return complete(Stage::inner_refinement, prompt, attempt);
}

std::string Advisor::run_stage(Stage stage, const std::string& prompt,
                               const std::function<bool(const std::string&)>& accept,
                               RefinementFamily family, bool is_refine) {
  AdvisorExchange ex;
  ex.stage = stage;
  ex.prompt_digest = hex_digest(prompt);
  const TokenCount budget = budgets_.budget_for(stage);
  for (int attempt = 0; attempt <= 1; ++attempt) {
    std::string response = is_refine ? complete_refine(family, prompt, attempt)
                                     : complete(stage, prompt, attempt);
    ex.retries = attempt;
    ex.truncated = false;
    if (count_tokens(response) > budget) {
      response = truncate_to_tokens(response, budget);
      ex.truncated = true;
    }
    ex.tokens_used = count_tokens(response);
    ex.response = response;
    if (!accept || accept(response)) {
      exchanges_.push_back(std::move(ex));
      return exchanges_.back().response;
    }
  }
  exchanges_.push_back(std::move(ex));
  raise(errc::advisor_failure,
        std::string(stage_name(stage)) + " response unparseable after one retry");
}

ComprehensionResult Advisor::comprehend(const SkillPackage& seed) {
  ComprehensionResult result;
  result.structure = derive_structure(seed);
  result.content = extract_content(seed, result.structure);

  std::ostringstream prompt;
  prompt << "[skill-advisor " << kPromptVersion << " :: comprehension]\n"
         << "Study this skill package and characterize the task it serves.\n\n"
         << serialize_skill_md(seed) << "\nFiles:\n";
  for (const auto& [path, _] : seed.references) prompt << "  " << path << "\n";
  for (const auto& [path, _] : seed.scripts) prompt << "  " << path << "\n";
  for (const auto& [path, _] : seed.assets) prompt << "  " << path << "\n";
  prompt << "\nRespond with lines:\n"
         << "task_summary: <one line>\n"
         << "success_criteria:\n- <item>\n"
         << "quality_dimensions:\n- <item>\n"
         << "promising_directions:\n- <item>\n"
         << "priority_action_kinds: <comma separated kind names, optional>\n";

  run_stage(Stage::comprehension, prompt.str(), [&](const std::string& r) {
    try {
      result.profile = parse_profile_text(r);
      return true;
    } catch (const Error&) {
      return false;
    }
  });
  return result;
}

std::string Advisor::analyze(const Structure& structure, const std::string& eval_summary,
                             const Profile& profile, const std::string& constraints) {
  std::ostringstream prompt;
  prompt << "[skill-advisor " << kPromptVersion << " :: analysis]\n"
         << render_profile(profile) << "\nCurrent structure:\n"
         << render_structure(structure) << "\nEvaluation so far: " << eval_summary
         << "\nConstraints: " << constraints
         << "\nAssess strengths and weaknesses of this structure in a short paragraph.\n";
  return run_stage(Stage::analysis, prompt.str(), nullptr);
}

std::string Advisor::diagnose(const std::string& analysis,
                              const std::string& rich_diagnostics,
                              const std::string& search_experience) {
  std::ostringstream prompt;
  prompt << "[skill-advisor " << kPromptVersion << " :: diagnosis]\n"
         << "Analysis:\n" << analysis << "\n\nObserved errors:\n" << rich_diagnostics
         << "\n\nSearch experience:\n" << search_experience
         << "\nName the most likely root cause of the remaining errors.\n";
  std::string response = run_stage(Stage::diagnosis, prompt.str(), nullptr);
  if (!rich_diagnostics.empty()) {
    response += "\nObserved error patterns: " + rich_diagnostics;
  }
  return response;
}

std::vector<EditAction> Advisor::propose_actions(
    const std::string& diagnosis, const std::vector<ActionTemplate>& catalog,
    const std::vector<std::string>& warnings) {
  std::ostringstream prompt;
  prompt << "[skill-advisor " << kPromptVersion << " :: proposal]\n"
         << "Diagnosis:\n" << diagnosis << "\n\nAdmissible actions:\n"
         << render_catalog(catalog);
  if (!warnings.empty()) {
    prompt << "\nWarnings from earlier rounds:\n";
    for (const auto& w : warnings) prompt << "- " << w << "\n";
  }
  prompt << "\nPropose one composite of at most three actions. Respond with blocks\n"
         << "separated by '---' lines, each block:\n"
         << "action: <KindName>\n<param>: <value>\nrationale: <why>\n";

  std::vector<EditAction> actions;
  run_stage(Stage::proposal, prompt.str(), [&](const std::string& r) {
    try {
      actions = parse_proposal_text(r);
      return true;
    } catch (const Error&) {
      return false;
    }
  });

  std::set<EditKind> offered;
  for (const auto& t : catalog) offered.insert(t.kind);
  for (const auto& action : actions) {
    if (!offered.count(action.kind)) {
      raise(errc::out_of_catalog, std::string(kind_name(action.kind)) +
                                      " is not in the admissible catalog");
    }
  }
  return actions;
}

std::optional<ContentState> Advisor::refine_variant(RefinementFamily family,
                                                    const ContentState& content,
                                                    const Structure& structure,
                                                    const Profile& profile,
                                                    const std::string& feedback) {
  std::ostringstream prompt;
  prompt << "[skill-advisor " << kPromptVersion << " :: refinement/"
         << family_name(family) << "]\n"
         << render_profile(profile) << "\nStructure:\n" << render_structure(structure)
         << "\nContent:\n" << render_content(content) << "\nFeedback: " << feedback
         << "\nPropose one content edit within the " << family_name(family)
         << " family, or stop. Respond with:\n"
         << "op: set_section|append_section|set_reference|set_script|set_description|"
            "set_metadata_value|stop\n"
         << "heading|path|key: <target>\ntext:\n<replacement text>\n";

  RefineDirective directive;
  run_stage(
      Stage::inner_refinement, prompt.str(),
      [&](const std::string& r) {
        try {
          directive = parse_refine_directive(r);
          return true;
        } catch (const Error&) {
          return false;
        }
      },
      family, true);

  if (directive.op == RefineDirective::Op::stop) return std::nullopt;
  if (!family_allows(directive.op, family)) {
    raise(errc::family_violation, std::string(op_name(directive.op)) +
                                      " is outside the " + family_name(family) +
                                      " family");
  }
  return apply_directive(content, structure, directive);
}

ScriptedAdvisor::ScriptedAdvisor(json playbook, StageBudgets budgets)
    : Advisor(budgets), playbook_(std::move(playbook)) {}

ScriptedAdvisor ScriptedAdvisor::from_file(const std::string& path, StageBudgets budgets) {
  json playbook;
  try {
    playbook = json::parse(read_file(path));
  } catch (const json::exception& e) {
    raise(errc::io_error, "bad playbook JSON in " + path + ": " + e.what());
  }
  return ScriptedAdvisor(std::move(playbook), budgets);
}

std::string ScriptedAdvisor::complete(Stage stage, const std::string& /*prompt*/,
                                      int attempt) {
  if (stage == Stage::comprehension) {
    return playbook_.value("profile", "");
  }
  const json rounds = playbook_.value("rounds", json::array());
  if (rounds.empty()) return "";
  const char* field = "analysis";
  std::size_t* counter = &analysis_calls_;
  if (stage == Stage::diagnosis) {
    field = "diagnosis";
    counter = &diagnosis_calls_;
  } else if (stage == Stage::proposal) {
    field = "proposal";
    counter = &proposal_calls_;
  } else if (stage == Stage::inner_refinement) {
    return "op: stop";
  }
  std::size_t index = attempt == 0 ? (*counter)++ : *counter - 1;
  return rounds[index % rounds.size()].value(field, "");
}

std::string ScriptedAdvisor::complete_refine(RefinementFamily family,
                                             const std::string& /*prompt*/, int attempt) {
  const json lists = playbook_.value("refine", json::object());
  const std::string key = family_name(family);
  if (!lists.contains(key)) return "op: stop";
  const json& list = lists.at(key);
  std::size_t& counter = refine_calls_[key];
  const std::size_t index = attempt == 0 ? counter++ : counter - 1;
  if (index >= list.size()) return "op: stop";
  return list[index].get<std::string>();
}

RemoteAdvisor::RemoteAdvisor(RemoteConfig config, StageBudgets budgets)
    : Advisor(budgets), config_(std::move(config)) {}

RemoteAdvisor RemoteAdvisor::from_env(StageBudgets budgets) {
  RemoteConfig config;
  if (const char* url = std::getenv("ADVISOR_BASE_URL")) config.base_url = url;
  if (const char* key = std::getenv("ADVISOR_API_KEY")) config.api_key = key;
  if (const char* model = std::getenv("ADVISOR_MODEL")) config.model = model;
  if (config.base_url.empty()) {
    raise(errc::advisor_failure, "ADVISOR_BASE_URL is not set");
  }
  return RemoteAdvisor(std::move(config), budgets);
}

std::string RemoteAdvisor::complete(Stage stage, const std::string& prompt, int attempt) {
  json body = {
      {"model", config_.model},
      {"temperature", 0.0},
      {"max_tokens", budgets().budget_for(stage)},
      {"messages",
       json::array(
           {json{{"role", "system"},
                 {"content", "You tune agent skill packages. Follow the requested "
                             "response format exactly."}},
            json{{"role", "user"},
                 {"content", attempt == 0
                                 ? prompt
                                 : prompt + "\nRespond in the required format only."}}})}};

  std::string last_error = "no response";
  for (int t = 0; t <= config_.transport_retries; ++t) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("malformed completion body: ") + e.what();
    }
  }
  raise(errc::advisor_failure,
        std::string(stage_name(stage)) + " call failed: " + last_error);
}

}  // namespace skillopt
