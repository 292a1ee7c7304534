#include "skillopt/structure_edits.hpp"

#include <algorithm>

#include "skillopt/errors.hpp"
#include "text_util.hpp"

namespace skillopt {

namespace {

struct KindInfo {
  EditKind kind;
  const char* name;
  std::vector<ParamSpec> params;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {EditKind::add_section,
       "AddSection",
       {{"heading", "text of the new level-2 heading", true},
        {"anchor", "existing heading to insert after; omit to append", false}}},
      {EditKind::remove_section,
       "RemoveSection",
       {{"heading", "existing heading to delete", true}}},
      {EditKind::reorder_sections,
       "ReorderSections",
       {{"order", "all named headings in the new order, '|' separated", true}}},
      {EditKind::rename_section,
       "RenameSection",
       {{"from", "existing heading", true}, {"to", "replacement heading", true}}},
      {EditKind::add_reference,
       "AddReference",
       {{"path", "new file under references/", true}}},
      {EditKind::remove_reference,
       "RemoveReference",
       {{"path", "existing references/ file to delete", true}}},
      {EditKind::inline_reference,
       "InlineReference",
       {{"path", "existing references/ file to fold into SKILL.md", true},
        {"into", "target heading; created when absent", true}}},
      {EditKind::extract_to_reference,
       "ExtractToReference",
       {{"section", "existing heading whose body moves out", true},
        {"path", "new file under references/", true}}},
      {EditKind::add_script, "AddScript", {{"path", "new file under scripts/", true}}},
      {EditKind::remove_script,
       "RemoveScript",
       {{"path", "existing scripts/ file to delete", true}}},
      {EditKind::add_asset, "AddAsset", {{"path", "new file under assets/", true}}},
      {EditKind::remove_asset,
       "RemoveAsset",
       {{"path", "existing assets/ file to delete", true}}},
      {EditKind::edit_metadata_keys,
       "EditMetadataKeys",
       {{"add", "frontmatter keys to add, '|' separated", false},
        {"remove", "frontmatter keys to drop, '|' separated", false}}},
      {EditKind::revise_description, "ReviseDescription", {}},
  };
  return table;
}

const KindInfo& info_for(EditKind kind) {
  for (const auto& info : kind_table()) {
    if (info.kind == kind) return info;
  }
  raise(errc::domain_error, "unknown edit kind");
}

std::vector<std::string> named_headings(const Structure& s) {
  std::vector<std::string> out;
  for (const auto& h : s.section_headings) {
    if (!h.empty()) out.push_back(h);
  }
  return out;
}

bool valid_rel_path(const std::string& path, std::string_view prefix) {
  if (path.size() <= prefix.size() || path.rfind(prefix, 0) != 0) return false;
  if (path.find('\\') != std::string::npos) return false;
  for (const auto& seg : detail::split_on(path, '/')) {
    if (seg.empty() || seg == "." || seg == "..") return false;
  }
  return true;
}

std::string require_param(const EditAction& a, const std::string& name) {
  const auto it = a.params.find(name);
  if (it == a.params.end() || it->second.empty()) {
    raise(errc::bad_params,
          std::string(kind_name(a.kind)) + " requires parameter '" + name + "'");
  }
  return it->second;
}

std::optional<std::string> opt_param(const EditAction& a, const std::string& name) {
  const auto it = a.params.find(name);
  if (it == a.params.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::vector<std::string> list_param(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& part : detail::split_on(value, '|')) {
    auto item = detail::strip(part);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

void add_unique(std::vector<std::string>& list, const std::string& value,
                const char* what) {
  if (std::find(list.begin(), list.end(), value) != list.end()) {
    raise(errc::bad_params, std::string(what) + " '" + value + "' already exists");
  }
  list.push_back(value);
}

void remove_existing(std::vector<std::string>& list, const std::string& value,
                     const char* what) {
  const auto it = std::find(list.begin(), list.end(), value);
  if (it == list.end()) {
    raise(errc::bad_params, std::string(what) + " '" + value + "' does not exist");
  }
  list.erase(it);
}

bool kind_admissible(const Structure& s, EditKind kind) {
  switch (kind) {
    case EditKind::add_section:
    case EditKind::add_reference:
    case EditKind::add_script:
    case EditKind::add_asset:
    case EditKind::edit_metadata_keys:
    case EditKind::revise_description:
      return true;
    case EditKind::remove_section:
    case EditKind::rename_section:
    case EditKind::extract_to_reference:
      return !named_headings(s).empty();
    case EditKind::reorder_sections:
      return named_headings(s).size() >= 2;
    case EditKind::remove_reference:
    case EditKind::inline_reference:
      return !s.reference_paths.empty();
    case EditKind::remove_script:
      return !s.script_paths.empty();
    case EditKind::remove_asset:
      return !s.asset_paths.empty();
  }
  return false;
}

EditOutcome apply_one(const Structure& s, const EditAction& a) {
  if (!kind_admissible(s, a.kind)) {
    raise(errc::inadmissible_action, std::string(kind_name(a.kind)) +
                                         " is not admissible for this structure");
  }
  EditOutcome out{s, {}};
  Structure& ns = out.structure;
  CarriedNote& note = out.note;

  switch (a.kind) {
    case EditKind::add_section: {
      const std::string heading = require_param(a, "heading");
      if (heading.find('\n') != std::string::npos) {
        raise(errc::bad_params, "heading must be a single line");
      }
      if (ns.has_section(heading)) {
        raise(errc::bad_params, "section '" + heading + "' already exists");
      }
      auto pos = ns.section_headings.end();
      if (const auto anchor = opt_param(a, "anchor")) {
        const auto it = std::find(ns.section_headings.begin(),
                                  ns.section_headings.end(), *anchor);
        if (it == ns.section_headings.end()) {
          raise(errc::bad_params, "anchor '" + *anchor + "' does not exist");
        }
        pos = it + 1;
      }
      ns.section_headings.insert(pos, heading);
      note.added_sections.push_back(heading);
      break;
    }
    case EditKind::remove_section: {
      const std::string heading = require_param(a, "heading");
      remove_existing(ns.section_headings, heading, "section");
      note.removed_sections.push_back(heading);
      break;
    }
    case EditKind::reorder_sections: {
      const auto order = list_param(require_param(a, "order"));
      auto current = named_headings(s);
      auto sorted_order = order;
      auto sorted_current = current;
      std::sort(sorted_order.begin(), sorted_order.end());
      std::sort(sorted_current.begin(), sorted_current.end());
      if (sorted_order != sorted_current) {
        raise(errc::bad_params, "order must be a permutation of the named headings");
      }
      std::vector<std::string> rebuilt;
      if (!s.section_headings.empty() && s.section_headings.front().empty()) {
        rebuilt.emplace_back();
      }
      rebuilt.insert(rebuilt.end(), order.begin(), order.end());
      note.sections_reordered = rebuilt != ns.section_headings;
      ns.section_headings = std::move(rebuilt);
      break;
    }
    case EditKind::rename_section: {
      const std::string from = require_param(a, "from");
      const std::string to = require_param(a, "to");
      if (to.find('\n') != std::string::npos) {
        raise(errc::bad_params, "heading must be a single line");
      }
      if (from == to) raise(errc::bad_params, "rename must change the heading");
      if (ns.has_section(to)) {
        raise(errc::bad_params, "section '" + to + "' already exists");
      }
      const auto it =
          std::find(ns.section_headings.begin(), ns.section_headings.end(), from);
      if (it == ns.section_headings.end() || from.empty()) {
        raise(errc::bad_params, "section '" + from + "' does not exist");
      }
      *it = to;
      note.renamed_sections.emplace_back(from, to);
      break;
    }
    case EditKind::add_reference: {
      const std::string path = require_param(a, "path");
      if (!valid_rel_path(path, "references/")) {
        raise(errc::bad_params, "'" + path + "' is not a clean references/ path");
      }
      add_unique(ns.reference_paths, path, "reference");
      note.added_references.push_back(path);
      break;
    }
    case EditKind::remove_reference: {
      const std::string path = require_param(a, "path");
      remove_existing(ns.reference_paths, path, "reference");
      note.removed_references.push_back(path);
      break;
    }
    case EditKind::inline_reference: {
      const std::string path = require_param(a, "path");
      const std::string into = require_param(a, "into");
      remove_existing(ns.reference_paths, path, "reference");
      if (!ns.has_section(into)) {
        ns.section_headings.push_back(into);
        note.added_sections.push_back(into);
      }
      note.removed_references.push_back(path);
      note.inlined.emplace_back(path, into);
      break;
    }
    case EditKind::extract_to_reference: {
      const std::string section = require_param(a, "section");
      const std::string path = require_param(a, "path");
      if (!ns.has_section(section) || section.empty()) {
        raise(errc::bad_params, "section '" + section + "' does not exist");
      }
      if (!valid_rel_path(path, "references/")) {
        raise(errc::bad_params, "'" + path + "' is not a clean references/ path");
      }
      add_unique(ns.reference_paths, path, "reference");
      note.added_references.push_back(path);
      note.extracted.emplace_back(section, path);
      break;
    }
    case EditKind::add_script: {
      const std::string path = require_param(a, "path");
      if (!valid_rel_path(path, "scripts/")) {
        raise(errc::bad_params, "'" + path + "' is not a clean scripts/ path");
      }
      add_unique(ns.script_paths, path, "script");
      note.added_scripts.push_back(path);
      break;
    }
    case EditKind::remove_script: {
      const std::string path = require_param(a, "path");
      remove_existing(ns.script_paths, path, "script");
      note.removed_scripts.push_back(path);
      break;
    }
    case EditKind::add_asset: {
      const std::string path = require_param(a, "path");
      if (!valid_rel_path(path, "assets/")) {
        raise(errc::bad_params, "'" + path + "' is not a clean assets/ path");
      }
      add_unique(ns.asset_paths, path, "asset");
      note.added_assets.push_back(path);
      break;
    }
    case EditKind::remove_asset: {
      const std::string path = require_param(a, "path");
      remove_existing(ns.asset_paths, path, "asset");
      note.removed_assets.push_back(path);
      break;
    }
    case EditKind::edit_metadata_keys: {
      const auto add = opt_param(a, "add");
      const auto remove = opt_param(a, "remove");
      if (!add && !remove) {
        raise(errc::bad_params, "EditMetadataKeys needs 'add' or 'remove'");
      }
      for (const auto& raw : add ? list_param(*add) : std::vector<std::string>{}) {
        const std::string key = normalize_key(raw);
        if (key == "name" || key == "description") {
          raise(errc::bad_params, "'" + key + "' is a protected key");
        }
        add_unique(ns.frontmatter_keys, key, "frontmatter key");
        note.added_keys.push_back(key);
      }
      for (const auto& raw : remove ? list_param(*remove) : std::vector<std::string>{}) {
        const std::string key = normalize_key(raw);
        if (key == "name" || key == "description") {
          raise(errc::bad_params, "'" + key + "' is a protected key");
        }
        remove_existing(ns.frontmatter_keys, key, "frontmatter key");
        note.removed_keys.push_back(key);
      }
      break;
    }
    case EditKind::revise_description: {
      note.description_revised = true;
      break;
    }
  }
  return out;
}

}  // namespace

const char* kind_name(EditKind kind) { return info_for(kind).name; }

std::optional<EditKind> kind_from_name(std::string_view name) {
  for (const auto& info : kind_table()) {
    if (name == info.name) return info.kind;
  }
  return std::nullopt;
}

std::string EditAction::label() const {
  std::string out = kind_name(kind);
  out.push_back('(');
  bool first = true;
  std::set<std::string> printed;
  for (const auto& spec : info_for(kind).params) {
    const auto it = params.find(spec.name);
    if (it == params.end()) continue;
    if (!first) out.append(", ");
    first = false;
    out.append(spec.name).append("=").append(it->second);
    printed.insert(spec.name);
  }
  for (const auto& [k, v] : params) {
    if (printed.count(k)) continue;
    if (!first) out.append(", ");
    first = false;
    out.append(k).append("=").append(v);
  }
  out.push_back(')');
  return out;
}

std::string actions_label(const std::vector<EditAction>& actions) {
  std::vector<std::string> parts;
  for (const auto& a : actions) parts.push_back(a.label());
  return detail::join(parts, " + ");
}

bool CarriedNote::empty() const { return *this == CarriedNote{}; }

CarriedNote CarriedNote::structural_only() const {
  CarriedNote out = *this;
  out.description_revised = false;
  out.inlined.clear();
  out.extracted.clear();
  return out;
}

std::vector<ActionTemplate> admissible_actions(
    const Structure& structure, const std::optional<std::set<EditKind>>& whitelist) {
  std::vector<ActionTemplate> out;
  for (const auto& info : kind_table()) {
    if (whitelist && !whitelist->count(info.kind)) continue;
    if (!kind_admissible(structure, info.kind)) continue;
    out.push_back({info.kind, info.params});
  }
  return out;
}

std::string render_catalog(const std::vector<ActionTemplate>& templates) {
  std::string out;
  for (const auto& t : templates) {
    out.append("- ").append(kind_name(t.kind)).append("(");
    for (std::size_t i = 0; i < t.params.size(); ++i) {
      if (i) out.append(", ");
      out.append(t.params[i].name);
      if (!t.params[i].required) out.append("?");
    }
    out.append(")");
    for (const auto& p : t.params) {
      out.append(" ").append(p.name).append(": ").append(p.doc).append(";");
    }
    out.push_back('\n');
  }
  return out;
}

EditOutcome apply_edit(const Structure& structure, const EditAction& action) {
  return apply_one(structure, action);
}

EditOutcome apply_composite(const Structure& structure,
                            const std::vector<EditAction>& actions,
                            std::size_t max_primitives) {
  if (actions.empty()) raise(errc::bad_params, "composite has no actions");
  if (actions.size() > max_primitives) {
    raise(errc::bad_params, "composite exceeds the cap of " +
                                std::to_string(max_primitives) + " primitives");
  }
  Structure current = structure;
  bool description_revised = false;
  std::vector<std::pair<std::string, std::string>> inlined;
  std::vector<std::pair<std::string, std::string>> extracted;
  for (const auto& action : actions) {
    EditOutcome step = apply_one(current, action);
    for (const auto& [from, to] : step.note.renamed_sections) {
      for (auto& [path, target] : inlined) {
        if (target == from) target = to;
      }
    }
    for (const auto& [path, target] : step.note.inlined) {
      inlined.emplace_back(path, target);
    }
    for (const auto& [section, path] : step.note.extracted) {
      extracted.emplace_back(section, path);
    }
    description_revised = description_revised || step.note.description_revised;
    current = std::move(step.structure);
  }
  CarriedNote net = diff_structures(structure, current);
  net.description_revised = description_revised;
  net.inlined = std::move(inlined);
  net.extracted = std::move(extracted);
  return {std::move(current), std::move(net)};
}

namespace {

void diff_lists(const std::vector<std::string>& before,
                const std::vector<std::string>& after, std::vector<std::string>& added,
                std::vector<std::string>& removed) {
  for (const auto& x : before) {
    if (std::find(after.begin(), after.end(), x) == after.end()) removed.push_back(x);
  }
  for (const auto& y : after) {
    if (std::find(before.begin(), before.end(), y) == before.end()) added.push_back(y);
  }
}

}  // namespace

CarriedNote diff_structures(const Structure& before, const Structure& after) {
  CarriedNote note;
  std::vector<std::string> gone;
  std::vector<std::string> fresh;
  diff_lists(before.section_headings, after.section_headings, fresh, gone);

  if (!gone.empty() && gone.size() == fresh.size() &&
      before.section_headings.size() == after.section_headings.size()) {
    std::vector<std::size_t> gone_pos;
    std::vector<std::size_t> fresh_pos;
    for (std::size_t i = 0; i < before.section_headings.size(); ++i) {
      if (std::find(gone.begin(), gone.end(), before.section_headings[i]) != gone.end()) {
        gone_pos.push_back(i);
      }
      if (std::find(fresh.begin(), fresh.end(), after.section_headings[i]) !=
          fresh.end()) {
        fresh_pos.push_back(i);
      }
    }
    if (gone_pos == fresh_pos) {
      for (std::size_t k = 0; k < gone_pos.size(); ++k) {
        note.renamed_sections.emplace_back(before.section_headings[gone_pos[k]],
                                           after.section_headings[gone_pos[k]]);
      }
      gone.clear();
      fresh.clear();
    }
  }
  note.added_sections = fresh;
  note.removed_sections = gone;

  std::vector<std::string> reduced_before;
  for (const auto& h : before.section_headings) {
    if (std::find(gone.begin(), gone.end(), h) != gone.end()) continue;
    std::string mapped = h;
    for (const auto& [from, to] : note.renamed_sections) {
      if (h == from) mapped = to;
    }
    reduced_before.push_back(mapped);
  }
  std::vector<std::string> reduced_after;
  for (const auto& h : after.section_headings) {
    if (std::find(fresh.begin(), fresh.end(), h) == fresh.end()) {
      reduced_after.push_back(h);
    }
  }
  note.sections_reordered = reduced_before != reduced_after;

  diff_lists(before.reference_paths, after.reference_paths, note.added_references,
             note.removed_references);
  diff_lists(before.script_paths, after.script_paths, note.added_scripts,
             note.removed_scripts);
  diff_lists(before.asset_paths, after.asset_paths, note.added_assets,
             note.removed_assets);
  diff_lists(before.frontmatter_keys, after.frontmatter_keys, note.added_keys,
             note.removed_keys);
  return note;
}

}  // namespace skillopt
