#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skillopt/tokens.hpp"

namespace skillopt {

/**
 * In-memory model of an agent skill package: a SKILL.md file with YAML-style
 * frontmatter and level-2 markdown sections, plus optional scripts/,
 * references/ and assets/ entries.
 *
 * The model is value-semantic and order-preserving. parse_package and
 * serialize_package form a round trip: serializing is byte-identical on the
 * canonical form, and parse(serialize(p)) == p for every parseable p.
 */

// Frontmatter of SKILL.md. Recognized keys get typed fields; anything else is
// kept verbatim in `extra`. `key_order` remembers every key in file order with
// its original spelling (e.g. "allowed-tools" vs "allowed_tools") so that
// serialization preserves the author's layout.
struct Frontmatter {
  std::string name;
  std::string description;
  std::optional<std::string> compatibility;
  std::optional<std::vector<std::string>> allowed_tools;
  std::vector<std::pair<std::string, std::string>> extra;
  std::vector<std::string> key_order;

  bool operator==(const Frontmatter&) const = default;
};

struct SkillPackage {
  std::string root_name;
  Frontmatter frontmatter;
  // (heading, body) pairs in file order; heading "" holds the preamble before
  // the first "## " heading and is present only when that preamble is
  // non-empty (or when the body is entirely empty).
  std::vector<std::pair<std::string, std::string>> body_sections;
  // (path, content) pairs, paths relative to the package root.
  std::vector<std::pair<std::string, std::string>> scripts;
  std::vector<std::pair<std::string, std::string>> references;
  std::vector<std::pair<std::string, std::string>> assets;

  bool operator==(const SkillPackage&) const = default;
};

struct BudgetPolicy {
  TokenCount activation_budget = 5000;
  TokenCount warning_threshold = 3500;
  std::size_t max_package_bytes = std::size_t{1} << 22;

  bool operator==(const BudgetPolicy&) const = default;
};

struct ValidationIssue {
  std::string code;
  std::string where;
  std::string message;
};

struct ValidationReport {
  bool valid = true;
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  TokenCount activation_tokens = 0;
  std::size_t package_bytes = 0;

  bool has_error(std::string_view code) const;
  bool has_warning(std::string_view code) const;
  std::string first_error_code() const;
};

// Structural skeleton of a package: what exists and in which order, with all
// prose stripped out. Lists hold no duplicates.
struct Structure {
  std::vector<std::string> section_headings;
  std::vector<std::string> reference_paths;
  std::vector<std::string> script_paths;
  std::vector<std::string> asset_paths;
  std::vector<std::string> frontmatter_keys;

  bool has_section(std::string_view heading) const;
  bool has_reference(std::string_view path) const;
  bool has_script(std::string_view path) const;
  bool has_asset(std::string_view path) const;
  bool has_key(std::string_view key) const;

  bool operator==(const Structure&) const = default;
};

// Everything a Structure leaves out: the prose, keyed by heading or path.
struct ContentState {
  Frontmatter frontmatter;
  std::map<std::string, std::string> section_bodies;
  std::map<std::string, std::string> reference_texts;
  std::map<std::string, std::string> script_texts;
  std::map<std::string, std::string> asset_blobs;

  bool operator==(const ContentState&) const = default;
};

// Relative path -> file bytes. std::map so iteration (and thus every derived
// ordering) is deterministic.
using DirectorySnapshot = std::map<std::string, std::string>;

// Normalizes '-' to '_' in a frontmatter key name.
std::string normalize_key(std::string_view key);

// Key-level editing on a Frontmatter value, addressed by normalized key name.
// set_ creates the key (appending to key_order) when absent; remove_ is a
// no-op for absent keys. Values for recognized scalar keys land in the typed
// fields, everything else in `extra`.
bool frontmatter_has_key(const Frontmatter& fm, std::string_view normalized);
std::string frontmatter_value(const Frontmatter& fm, std::string_view normalized);
void set_frontmatter_value(Frontmatter& fm, std::string_view normalized,
                           std::string value);
void remove_frontmatter_key(Frontmatter& fm, std::string_view normalized);

// Throws Error with code missing_skill_md, malformed_frontmatter,
// duplicate_heading, unrecognized_top_level_entry or bad_path.
SkillPackage parse_package(const DirectorySnapshot& snapshot);

DirectorySnapshot serialize_package(const SkillPackage& pkg);
std::string serialize_skill_md(const SkillPackage& pkg);

// Never throws for budget problems; every violation lands in the report.
ValidationReport validate(const SkillPackage& pkg, const BudgetPolicy& policy = {},
                          const TokenCounter& counter = {});

Structure derive_structure(const SkillPackage& pkg);

// Requires derive_structure(pkg) == structure, else throws structure_mismatch.
ContentState extract_content(const SkillPackage& pkg, const Structure& structure);

// Requires the content to cover exactly the keys the structure names, else
// throws incompatible_content. recompose(extract_content(p, s), s) == p.
SkillPackage recompose(const ContentState& content, const Structure& structure);

}  // namespace skillopt
