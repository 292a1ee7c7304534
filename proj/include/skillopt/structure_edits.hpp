#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "skillopt/skill_package.hpp"

namespace skillopt {

/**
 * Typed, parameterized edits over package Structures. Edits are pure: they
 * map a Structure to a new Structure plus a CarriedNote describing what moved,
 * and never touch content. Inadmissible or ill-parameterized edits throw; a
 * composite either applies fully or not at all.
 */

enum class EditKind {
  add_section,
  remove_section,
  reorder_sections,
  rename_section,
  add_reference,
  remove_reference,
  inline_reference,
  extract_to_reference,
  add_script,
  remove_script,
  add_asset,
  remove_asset,
  edit_metadata_keys,
  revise_description,
};

inline constexpr EditKind kAllEditKinds[] = {
    EditKind::add_section,         EditKind::remove_section,
    EditKind::reorder_sections,    EditKind::rename_section,
    EditKind::add_reference,       EditKind::remove_reference,
    EditKind::inline_reference,    EditKind::extract_to_reference,
    EditKind::add_script,          EditKind::remove_script,
    EditKind::add_asset,           EditKind::remove_asset,
    EditKind::edit_metadata_keys,  EditKind::revise_description,
};

const char* kind_name(EditKind kind);
std::optional<EditKind> kind_from_name(std::string_view name);

// List-valued params ("order", "add", "remove") are '|'-separated.
struct EditAction {
  EditKind kind;
  std::map<std::string, std::string> params;
  std::string rationale;

  // Canonical text form, e.g. "InlineReference(path=references/a.md, into=Use)".
  std::string label() const;

  bool operator==(const EditAction&) const = default;
};

std::string actions_label(const std::vector<EditAction>& actions);

struct ParamSpec {
  std::string name;
  std::string doc;
  bool required = true;
};

struct ActionTemplate {
  EditKind kind;
  std::vector<ParamSpec> params;
};

// What an edit did, at the structural level, plus routing hints that tell the
// content bridge where removed text should flow.
struct CarriedNote {
  std::vector<std::string> added_sections;
  std::vector<std::string> removed_sections;
  std::vector<std::pair<std::string, std::string>> renamed_sections;
  bool sections_reordered = false;
  std::vector<std::string> added_references;
  std::vector<std::string> removed_references;
  std::vector<std::string> added_scripts;
  std::vector<std::string> removed_scripts;
  std::vector<std::string> added_assets;
  std::vector<std::string> removed_assets;
  std::vector<std::string> added_keys;
  std::vector<std::string> removed_keys;
  bool description_revised = false;
  // reference path -> section its text was folded into
  std::vector<std::pair<std::string, std::string>> inlined;
  // section -> reference path its body was moved to
  std::vector<std::pair<std::string, std::string>> extracted;

  bool empty() const;
  // Copy with the non-structural fields (routing hints, description flag)
  // cleared; diff_structures can only ever recover this part.
  CarriedNote structural_only() const;

  bool operator==(const CarriedNote&) const = default;
};

struct EditOutcome {
  Structure structure;
  CarriedNote note;
};

// The admissible templates for this structure, optionally restricted to a
// whitelist of kinds. Deterministic order (catalog declaration order).
std::vector<ActionTemplate> admissible_actions(
    const Structure& structure,
    const std::optional<std::set<EditKind>>& whitelist = std::nullopt);

// Human/advisor readable rendering of the templates.
std::string render_catalog(const std::vector<ActionTemplate>& templates);

// Throws Error(inadmissible_action) when the kind cannot apply to this
// structure, Error(bad_params) when parameters are missing or contradictory.
EditOutcome apply_edit(const Structure& structure, const EditAction& action);

// Applies at most max_primitives actions in order; any failure aborts the
// whole composite. The note reflects the net structural change.
EditOutcome apply_composite(const Structure& structure,
                            const std::vector<EditAction>& actions,
                            std::size_t max_primitives = 3);

// Structural difference between two structures (adds, removals, renames,
// reorders). Routing hints cannot be recovered and stay empty.
CarriedNote diff_structures(const Structure& before, const Structure& after);

}  // namespace skillopt
