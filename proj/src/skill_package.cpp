#include "skillopt/skill_package.hpp"

#include <algorithm>
#include <set>

#include "skillopt/errors.hpp"
#include "text_util.hpp"

namespace skillopt {

namespace {

using detail::collapse_ws;
using detail::is_blank;
using detail::join;
using detail::split_lines;
using detail::split_on;
using detail::strip;

struct FmEntry {
  std::string key;
  std::string raw;
  bool is_list = false;
  std::vector<std::string> items;
};

bool indented(const std::string& line) {
  return !line.empty() && (line[0] == ' ' || line[0] == '\t');
}

bool list_item(const std::string& line, std::string& item) {
  std::string_view s = detail::lstrip(line);
  if (s.size() < 2 || s[0] != '-' || s[1] != ' ') return false;
  item = std::string(strip(s.substr(2)));
  return true;
}

std::vector<FmEntry> parse_frontmatter_entries(const std::vector<std::string>& lines) {
  std::vector<FmEntry> entries;
  std::set<std::string> seen;
  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (is_blank(line)) {
      ++i;
      continue;
    }
    if (!indented(line) && line.front() == '#') {
      ++i;
      continue;
    }
    if (indented(line)) {
      raise(errc::malformed_frontmatter, "unexpected indented line: '" + line + "'");
    }
    std::string ignored;
    if (list_item(line, ignored)) {
      raise(errc::malformed_frontmatter, "top level must be a mapping, found list item");
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos || colon == 0) {
      raise(errc::malformed_frontmatter, "expected 'key: value', got '" + line + "'");
    }
    FmEntry entry;
    entry.key = std::string(detail::rstrip(std::string_view(line).substr(0, colon)));
    std::string_view rest = std::string_view(line).substr(colon + 1);
    if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    entry.raw = std::string(rest);

    std::vector<std::string> cont;
    std::size_t j = i + 1;
    while (j < lines.size() && indented(lines[j])) {
      cont.push_back(lines[j]);
      ++j;
    }
    const bool first_blank = is_blank(entry.raw);
    bool all_items = !cont.empty();
    std::vector<std::string> items;
    for (const auto& c : cont) {
      std::string item;
      if (!list_item(c, item)) {
        all_items = false;
        break;
      }
      items.push_back(item);
    }
    if (first_blank && all_items) {
      entry.is_list = true;
      entry.items = std::move(items);
      entry.raw.clear();
    } else {
      for (const auto& c : cont) {
        entry.raw.push_back('\n');
        entry.raw.append(c);
      }
    }
    if (!seen.insert(normalize_key(entry.key)).second) {
      raise(errc::malformed_frontmatter, "duplicate key '" + entry.key + "'");
    }
    entries.push_back(std::move(entry));
    i = j;
  }
  return entries;
}

std::vector<std::string> parse_flow_list(std::string_view raw) {
  std::string_view s = strip(raw);
  if (!s.empty() && s.front() == '[' && s.back() == ']') {
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  for (const auto& part : split_on(s, ',')) {
    auto item = strip(part);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

Frontmatter build_frontmatter(const std::vector<FmEntry>& entries) {
  Frontmatter fm;
  for (const auto& e : entries) {
    const std::string norm = normalize_key(e.key);
    fm.key_order.push_back(e.key);
    if (norm == "name" || norm == "description" || norm == "compatibility") {
      if (e.is_list) {
        raise(errc::malformed_frontmatter, "'" + e.key + "' must be a scalar");
      }
      const std::string value = collapse_ws(e.raw);
      if (norm == "name") {
        fm.name = value;
      } else if (norm == "description") {
        fm.description = value;
      } else {
        fm.compatibility = value;
      }
    } else if (norm == "allowed_tools") {
      fm.allowed_tools = e.is_list ? e.items : parse_flow_list(e.raw);
    } else {
      fm.extra.emplace_back(e.key, e.raw);
    }
  }
  return fm;
}

std::string trim_boundary_blank_lines(const std::vector<std::string>& lines,
                                      std::size_t first, std::size_t last) {
  while (first < last && is_blank(lines[first])) ++first;
  while (last > first && is_blank(lines[last - 1])) --last;
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out.push_back('\n');
    out.append(lines[i]);
  }
  return out;
}

bool heading_line(const std::string& line, std::string& heading) {
  if (line.rfind("## ", 0) != 0) return false;
  auto text = strip(std::string_view(line).substr(3));
  if (text.empty()) return false;
  heading = std::string(text);
  return true;
}

SkillPackage parse_skill_md(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || detail::rstrip(lines[0]) != "---") {
    raise(errc::malformed_frontmatter, "SKILL.md must open with a '---' fence");
  }
  std::size_t close = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::rstrip(lines[i]) == "---") {
      close = i;
      break;
    }
  }
  if (close == 0) {
    raise(errc::malformed_frontmatter, "frontmatter fence '---' is never closed");
  }

  SkillPackage pkg;
  pkg.frontmatter = build_frontmatter(
      parse_frontmatter_entries({lines.begin() + 1, lines.begin() + close}));
  pkg.root_name = pkg.frontmatter.name;

  std::vector<std::size_t> heading_at;
  std::vector<std::string> headings;
  std::set<std::string> seen;
  for (std::size_t i = close + 1; i < lines.size(); ++i) {
    std::string h;
    if (heading_line(lines[i], h)) {
      if (!seen.insert(h).second) {
        raise(errc::duplicate_heading, "'" + h + "'");
      }
      heading_at.push_back(i);
      headings.push_back(h);
    }
  }
  const std::size_t body_end = lines.size();
  const std::size_t preamble_end = heading_at.empty() ? body_end : heading_at[0];
  const std::string preamble = trim_boundary_blank_lines(lines, close + 1, preamble_end);
  if (!preamble.empty() || heading_at.empty()) {
    pkg.body_sections.emplace_back("", preamble);
  }
  for (std::size_t k = 0; k < heading_at.size(); ++k) {
    const std::size_t from = heading_at[k] + 1;
    const std::size_t to = k + 1 < heading_at.size() ? heading_at[k + 1] : body_end;
    pkg.body_sections.emplace_back(headings[k], trim_boundary_blank_lines(lines, from, to));
  }
  return pkg;
}

void check_entry_path(const std::string& path) {
  if (path.empty()) raise(errc::bad_path, "empty path");
  if (path.front() == '/') raise(errc::bad_path, "absolute path '" + path + "'");
  if (path.find('\\') != std::string::npos) {
    raise(errc::bad_path, "backslash in path '" + path + "'");
  }
  for (const auto& seg : split_on(path, '/')) {
    if (seg.empty() || seg == "." || seg == "..") {
      raise(errc::bad_path, "invalid segment in path '" + path + "'");
    }
  }
}

std::optional<std::string> path_problem(const std::string& path, std::string_view prefix) {
  if (path.empty()) return "empty path";
  if (path.front() == '/') return "absolute path";
  if (path.find('\\') != std::string::npos) return "backslash in path";
  for (const auto& seg : split_on(path, '/')) {
    if (seg.empty() || seg == "." || seg == "..") return "invalid path segment";
  }
  if (path.rfind(prefix, 0) != 0 || path.size() <= prefix.size()) {
    return "expected prefix '" + std::string(prefix) + "'";
  }
  return std::nullopt;
}

std::string serialize_frontmatter(const Frontmatter& fm) {
  std::string out;
  for (const auto& key : fm.key_order) {
    const std::string norm = normalize_key(key);
    std::string raw;
    bool is_list = false;
    std::vector<std::string> items;
    if (norm == "name") {
      raw = fm.name;
    } else if (norm == "description") {
      raw = fm.description;
    } else if (norm == "compatibility") {
      raw = fm.compatibility.value_or("");
    } else if (norm == "allowed_tools") {
      is_list = true;
      if (fm.allowed_tools) items = *fm.allowed_tools;
    } else {
      for (const auto& [k, v] : fm.extra) {
        if (k == key) {
          raw = v;
          break;
        }
      }
    }
    out.append(key);
    out.push_back(':');
    if (is_list) {
      for (const auto& item : items) {
        out.append("\n  - ");
        out.append(item);
      }
    } else if (!raw.empty()) {
      if (raw.front() != '\n') out.push_back(' ');
      out.append(raw);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::string normalize_key(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

bool frontmatter_has_key(const Frontmatter& fm, std::string_view normalized) {
  for (const auto& key : fm.key_order) {
    if (normalize_key(key) == normalized) return true;
  }
  return false;
}

std::string frontmatter_value(const Frontmatter& fm, std::string_view normalized) {
  if (normalized == "name") return fm.name;
  if (normalized == "description") return fm.description;
  if (normalized == "compatibility") return fm.compatibility.value_or("");
  if (normalized == "allowed_tools") {
    return fm.allowed_tools ? detail::join(*fm.allowed_tools, ", ") : "";
  }
  for (const auto& [k, v] : fm.extra) {
    if (normalize_key(k) == normalized) return v;
  }
  return "";
}

void set_frontmatter_value(Frontmatter& fm, std::string_view normalized,
                           std::string value) {
  if (!frontmatter_has_key(fm, normalized)) {
    fm.key_order.emplace_back(normalized);
  }
  if (normalized == "name") {
    fm.name = std::move(value);
  } else if (normalized == "description") {
    fm.description = std::move(value);
  } else if (normalized == "compatibility") {
    fm.compatibility = std::move(value);
  } else if (normalized == "allowed_tools") {
    fm.allowed_tools = parse_flow_list(value);
  } else {
    for (auto& [k, v] : fm.extra) {
      if (normalize_key(k) == normalized) {
        v = std::move(value);
        return;
      }
    }
    fm.extra.emplace_back(std::string(normalized), std::move(value));
  }
}

void remove_frontmatter_key(Frontmatter& fm, std::string_view normalized) {
  std::erase_if(fm.key_order, [&](const std::string& k) {
    return normalize_key(k) == normalized;
  });
  if (normalized == "name") {
    fm.name.clear();
  } else if (normalized == "description") {
    fm.description.clear();
  } else if (normalized == "compatibility") {
    fm.compatibility.reset();
  } else if (normalized == "allowed_tools") {
    fm.allowed_tools.reset();
  } else {
    std::erase_if(fm.extra, [&](const auto& kv) {
      return normalize_key(kv.first) == normalized;
    });
  }
}

bool ValidationReport::has_error(std::string_view code) const {
  return std::any_of(errors.begin(), errors.end(),
                     [&](const ValidationIssue& e) { return e.code == code; });
}

bool ValidationReport::has_warning(std::string_view code) const {
  return std::any_of(warnings.begin(), warnings.end(),
                     [&](const ValidationIssue& w) { return w.code == code; });
}

std::string ValidationReport::first_error_code() const {
  return errors.empty() ? std::string() : errors.front().code;
}

bool Structure::has_section(std::string_view heading) const {
  return std::find(section_headings.begin(), section_headings.end(), heading) !=
         section_headings.end();
}
bool Structure::has_reference(std::string_view path) const {
  return std::find(reference_paths.begin(), reference_paths.end(), path) !=
         reference_paths.end();
}
bool Structure::has_script(std::string_view path) const {
  return std::find(script_paths.begin(), script_paths.end(), path) != script_paths.end();
}
bool Structure::has_asset(std::string_view path) const {
  return std::find(asset_paths.begin(), asset_paths.end(), path) != asset_paths.end();
}
bool Structure::has_key(std::string_view key) const {
  return std::find(frontmatter_keys.begin(), frontmatter_keys.end(), key) !=
         frontmatter_keys.end();
}

SkillPackage parse_package(const DirectorySnapshot& snapshot) {
  const auto it = snapshot.find("SKILL.md");
  if (it == snapshot.end()) {
    raise(errc::missing_skill_md, "snapshot has no SKILL.md at the package root");
  }
  SkillPackage pkg = parse_skill_md(it->second);
  for (const auto& [path, content] : snapshot) {
    if (path == "SKILL.md") continue;
    check_entry_path(path);
    if (path.rfind("scripts/", 0) == 0 && path.size() > 8) {
      pkg.scripts.emplace_back(path, content);
    } else if (path.rfind("references/", 0) == 0 && path.size() > 11) {
      pkg.references.emplace_back(path, content);
    } else if (path.rfind("assets/", 0) == 0 && path.size() > 7) {
      pkg.assets.emplace_back(path, content);
    } else {
      raise(errc::unrecognized_top_level_entry, "'" + path + "'");
    }
  }
  return pkg;
}

std::string serialize_skill_md(const SkillPackage& pkg) {
  std::string out = "---\n";
  out.append(serialize_frontmatter(pkg.frontmatter));
  out.append("---\n");
  std::vector<std::string> parts;
  for (const auto& [heading, body] : pkg.body_sections) {
    if (heading.empty()) {
      parts.push_back(body);
    } else {
      std::string part = "## " + heading;
      if (!body.empty()) {
        part.push_back('\n');
        part.append(body);
      }
      parts.push_back(std::move(part));
    }
  }
  std::string body_text = join(parts, "\n\n");
  if (parts.size() == 1 && parts[0].empty()) body_text.clear();
  out.append(body_text);
  if (!body_text.empty()) out.push_back('\n');
  return out;
}

DirectorySnapshot serialize_package(const SkillPackage& pkg) {
  DirectorySnapshot snap;
  snap["SKILL.md"] = serialize_skill_md(pkg);
  for (const auto& [path, content] : pkg.scripts) snap[path] = content;
  for (const auto& [path, content] : pkg.references) snap[path] = content;
  for (const auto& [path, content] : pkg.assets) snap[path] = content;
  return snap;
}

ValidationReport validate(const SkillPackage& pkg, const BudgetPolicy& policy,
                          const TokenCounter& counter) {
  const TokenCounter count = counter ? counter : default_token_counter();
  ValidationReport report;
  auto error = [&](std::string code, std::string where, std::string message) {
    report.errors.push_back({std::move(code), std::move(where), std::move(message)});
  };
  auto warning = [&](std::string code, std::string where, std::string message) {
    report.warnings.push_back({std::move(code), std::move(where), std::move(message)});
  };

  if (strip(pkg.frontmatter.name).empty()) {
    error("EmptyName", "frontmatter.name", "name must be non-empty");
  }
  if (strip(pkg.frontmatter.description).empty()) {
    error("EmptyDescription", "frontmatter.description", "description must be non-empty");
  }

  std::set<std::string> headings;
  for (const auto& [heading, _] : pkg.body_sections) {
    if (!headings.insert(heading).second) {
      error("DuplicateHeading", heading, "section heading appears more than once");
    }
  }

  std::set<std::string> paths;
  auto check_paths = [&](const std::vector<std::pair<std::string, std::string>>& files,
                         std::string_view prefix) {
    for (const auto& [path, _] : files) {
      if (auto problem = path_problem(path, prefix)) {
        error("BadPath", path, *problem);
      }
      if (!paths.insert(path).second) {
        error("DuplicatePath", path, "path appears more than once");
      }
    }
  };
  check_paths(pkg.scripts, "scripts/");
  check_paths(pkg.references, "references/");
  check_paths(pkg.assets, "assets/");

  const std::string skill_md = serialize_skill_md(pkg);
  report.activation_tokens = count(skill_md);
  std::size_t bytes = skill_md.size();
  for (const auto* files : {&pkg.scripts, &pkg.references, &pkg.assets}) {
    for (const auto& [_, content] : *files) bytes += content.size();
  }
  report.package_bytes = bytes;

  if (report.activation_tokens > policy.activation_budget) {
    error("BudgetExceeded", "SKILL.md",
          "activation text is " + std::to_string(report.activation_tokens) +
              " tokens, budget is " + std::to_string(policy.activation_budget));
  }
  if (report.activation_tokens > policy.warning_threshold) {
    warning("BudgetWarning", "SKILL.md",
            "activation text is " + std::to_string(report.activation_tokens) +
                " tokens, warning threshold is " +
                std::to_string(policy.warning_threshold));
  }
  if (bytes > policy.max_package_bytes) {
    error("PackageTooLarge", ".",
          "package is " + std::to_string(bytes) + " bytes, limit is " +
              std::to_string(policy.max_package_bytes));
  } else if (10 * bytes >= 9 * policy.max_package_bytes) {
    warning("PackageSizeWarning", ".",
            "package is " + std::to_string(bytes) + " bytes, at 90% of the " +
                std::to_string(policy.max_package_bytes) + " byte limit");
  }

  report.valid = report.errors.empty();
  return report;
}

Structure derive_structure(const SkillPackage& pkg) {
  Structure s;
  for (const auto& [heading, _] : pkg.body_sections) s.section_headings.push_back(heading);
  for (const auto& [path, _] : pkg.references) s.reference_paths.push_back(path);
  for (const auto& [path, _] : pkg.scripts) s.script_paths.push_back(path);
  for (const auto& [path, _] : pkg.assets) s.asset_paths.push_back(path);
  for (const auto& key : pkg.frontmatter.key_order) {
    s.frontmatter_keys.push_back(normalize_key(key));
  }
  return s;
}

ContentState extract_content(const SkillPackage& pkg, const Structure& structure) {
  if (derive_structure(pkg) != structure) {
    raise(errc::structure_mismatch,
          "package skeleton does not match the supplied structure");
  }
  ContentState c;
  c.frontmatter = pkg.frontmatter;
  for (const auto& [heading, body] : pkg.body_sections) c.section_bodies[heading] = body;
  for (const auto& [path, text] : pkg.references) c.reference_texts[path] = text;
  for (const auto& [path, text] : pkg.scripts) c.script_texts[path] = text;
  for (const auto& [path, blob] : pkg.assets) c.asset_blobs[path] = blob;
  return c;
}

namespace {

template <typename Map>
void require_exact_keys(const Map& map, const std::vector<std::string>& keys,
                        std::string_view what) {
  std::vector<std::string> have;
  for (const auto& [k, _] : map) have.push_back(k);
  std::vector<std::string> want = keys;
  std::sort(want.begin(), want.end());
  if (have != want) {
    raise(errc::incompatible_content,
          std::string(what) + " keys do not cover the structure exactly");
  }
}

}  // namespace

SkillPackage recompose(const ContentState& content, const Structure& structure) {
  require_exact_keys(content.section_bodies, structure.section_headings, "section");
  require_exact_keys(content.reference_texts, structure.reference_paths, "reference");
  require_exact_keys(content.script_texts, structure.script_paths, "script");
  require_exact_keys(content.asset_blobs, structure.asset_paths, "asset");
  std::vector<std::string> fm_keys;
  for (const auto& key : content.frontmatter.key_order) {
    fm_keys.push_back(normalize_key(key));
  }
  std::vector<std::string> want = structure.frontmatter_keys;
  std::sort(fm_keys.begin(), fm_keys.end());
  std::sort(want.begin(), want.end());
  if (fm_keys != want) {
    raise(errc::incompatible_content, "frontmatter keys do not match the structure");
  }

  SkillPackage pkg;
  pkg.frontmatter = content.frontmatter;
  pkg.root_name = content.frontmatter.name;
  for (const auto& heading : structure.section_headings) {
    pkg.body_sections.emplace_back(heading, content.section_bodies.at(heading));
  }
  for (const auto& path : structure.reference_paths) {
    pkg.references.emplace_back(path, content.reference_texts.at(path));
  }
  for (const auto& path : structure.script_paths) {
    pkg.scripts.emplace_back(path, content.script_texts.at(path));
  }
  for (const auto& path : structure.asset_paths) {
    pkg.assets.emplace_back(path, content.asset_blobs.at(path));
  }
  return pkg;
}

}  // namespace skillopt
