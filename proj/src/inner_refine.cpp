#include "skillopt/inner_refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "skillopt/errors.hpp"

namespace skillopt {

namespace {

bool contains(const std::vector<std::string>& list, const std::string& value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

int family_priority(RefinementFamily family) {
  switch (family) {
    case RefinementFamily::script_edit: return 4;
    case RefinementFamily::redistribution: return 3;
    case RefinementFamily::instruction_text: return 2;
    case RefinementFamily::metadata_routing_text: return 1;
    case RefinementFamily::metadata_light: return 0;
  }
  return 0;
}

}  // namespace

ContentState align_content(const ContentState& old_content,
                           const Structure& old_structure,
                           const Structure& new_structure, const CarriedNote& note) {
  std::map<std::string, std::string> rename_fw;
  std::map<std::string, std::string> rename_bw;
  for (const auto& [from, to] : note.renamed_sections) {
    if (!old_structure.has_section(from) || !new_structure.has_section(to)) {
      raise(errc::bridge_failure,
            "rename '" + from + "' -> '" + to + "' does not match the structures");
    }
    rename_fw[from] = to;
    rename_bw[to] = from;
  }

  ContentState out;
  out.frontmatter = old_content.frontmatter;
  for (const auto& key : note.removed_keys) {
    if (!frontmatter_has_key(out.frontmatter, key)) {
      raise(errc::bridge_failure, "removed key '" + key + "' is unknown");
    }
    remove_frontmatter_key(out.frontmatter, key);
  }
  for (const auto& key : note.added_keys) {
    if (frontmatter_has_key(out.frontmatter, key)) {
      raise(errc::bridge_failure, "added key '" + key + "' already present");
    }
    set_frontmatter_value(out.frontmatter, key, kMetadataStub);
  }

  std::set<std::string> stubbed;
  for (const auto& heading : new_structure.section_headings) {
    const auto bw = rename_bw.find(heading);
    const std::string old_name = bw == rename_bw.end() ? heading : bw->second;
    const auto found = old_content.section_bodies.find(old_name);
    if (contains(note.added_sections, heading)) {
      out.section_bodies[heading] = kSectionStub;
      stubbed.insert(heading);
    } else if (found != old_content.section_bodies.end()) {
      out.section_bodies[heading] = found->second;
    } else {
      raise(errc::bridge_failure, "no source content for section '" + heading + "'");
    }
  }

  for (const auto& [path, target] : note.inlined) {
    const auto ref = old_content.reference_texts.find(path);
    if (ref == old_content.reference_texts.end()) {
      raise(errc::bridge_failure, "inlined reference '" + path + "' is unknown");
    }
    const auto section = out.section_bodies.find(target);
    if (section == out.section_bodies.end()) continue;
    if (stubbed.count(target) || section->second.empty()) {
      section->second = ref->second;
      stubbed.erase(target);
    } else {
      section->second += "\n\n" + ref->second;
    }
  }

  for (const auto& [section, path] : note.extracted) {
    const auto body = old_content.section_bodies.find(section);
    if (body == old_content.section_bodies.end()) {
      raise(errc::bridge_failure, "extracted section '" + section + "' is unknown");
    }
    if (!new_structure.has_reference(path)) {
      raise(errc::bridge_failure, "extraction target '" + path + "' is not a reference");
    }
    out.reference_texts[path] = body->second;
    const auto fw = rename_fw.find(section);
    const std::string new_name = fw == rename_fw.end() ? section : fw->second;
    const auto it = out.section_bodies.find(new_name);
    if (it != out.section_bodies.end()) {
      it->second = "See " + path + ".";
    }
  }

  for (const auto& path : new_structure.reference_paths) {
    if (out.reference_texts.count(path)) continue;
    const auto found = old_content.reference_texts.find(path);
    if (found != old_content.reference_texts.end()) {
      out.reference_texts[path] = found->second;
    } else if (contains(note.added_references, path)) {
      out.reference_texts[path] = kReferenceStub;
    } else {
      raise(errc::bridge_failure, "no source content for reference '" + path + "'");
    }
  }
  for (const auto& path : new_structure.script_paths) {
    const auto found = old_content.script_texts.find(path);
    if (found != old_content.script_texts.end()) {
      out.script_texts[path] = found->second;
    } else if (contains(note.added_scripts, path)) {
      out.script_texts[path] = kScriptStub;
    } else {
      raise(errc::bridge_failure, "no source content for script '" + path + "'");
    }
  }
  for (const auto& path : new_structure.asset_paths) {
    const auto found = old_content.asset_blobs.find(path);
    if (found != old_content.asset_blobs.end()) {
      out.asset_blobs[path] = found->second;
    } else if (contains(note.added_assets, path)) {
      out.asset_blobs[path] = std::string();
    } else {
      raise(errc::bridge_failure, "no source content for asset '" + path + "'");
    }
  }

  std::vector<std::string> fm_keys;
  for (const auto& key : out.frontmatter.key_order) {
    fm_keys.push_back(normalize_key(key));
  }
  std::vector<std::string> want = new_structure.frontmatter_keys;
  std::sort(fm_keys.begin(), fm_keys.end());
  std::sort(want.begin(), want.end());
  if (fm_keys != want) {
    raise(errc::bridge_failure, "carried note leaves frontmatter keys inconsistent");
  }
  return out;
}

RefinementFamily dispatch_family(const EditAction& action) {
  switch (action.kind) {
    case EditKind::add_script:
    case EditKind::remove_script:
      return RefinementFamily::script_edit;
    case EditKind::add_reference:
    case EditKind::remove_reference:
    case EditKind::inline_reference:
    case EditKind::extract_to_reference:
      return RefinementFamily::redistribution;
    case EditKind::add_section:
    case EditKind::remove_section:
    case EditKind::reorder_sections:
    case EditKind::rename_section:
      return RefinementFamily::instruction_text;
    case EditKind::revise_description:
      return RefinementFamily::metadata_routing_text;
    case EditKind::edit_metadata_keys:
    case EditKind::add_asset:
    case EditKind::remove_asset:
      return RefinementFamily::metadata_light;
  }
  return RefinementFamily::metadata_light;
}

RefinementFamily dispatch_family(const std::vector<EditAction>& composite) {
  if (composite.empty()) {
    raise(errc::bad_params, "cannot dispatch an empty composite");
  }
  RefinementFamily best = dispatch_family(composite.front());
  for (const auto& action : composite) {
    const RefinementFamily f = dispatch_family(action);
    if (family_priority(f) > family_priority(best)) best = f;
  }
  return best;
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double lcb(const std::vector<double>& deltas, double t_crit) {
  if (deltas.empty()) raise(errc::empty_deltas, "no deltas to bound");
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= static_cast<double>(deltas.size());
  const double sd = sample_stddev(deltas);
  return mean - t_crit * sd / std::sqrt(static_cast<double>(deltas.size()));
}

bool family_allows_edit(const ContentState& before, const ContentState& after,
                        RefinementFamily family) {
  if (before.frontmatter.name != after.frontmatter.name) return false;
  if (before.asset_blobs != after.asset_blobs) return false;

  const bool description_changed =
      before.frontmatter.description != after.frontmatter.description;
  Frontmatter fa = before.frontmatter;
  Frontmatter fb = after.frontmatter;
  fa.description.clear();
  fb.description.clear();
  const bool metadata_changed = !(fa == fb);
  const bool sections_changed = before.section_bodies != after.section_bodies;
  const bool references_changed = before.reference_texts != after.reference_texts;
  const bool scripts_changed = before.script_texts != after.script_texts;

  switch (family) {
    case RefinementFamily::metadata_light:
      return !description_changed && !sections_changed && !references_changed &&
             !scripts_changed;
    case RefinementFamily::metadata_routing_text:
      return !metadata_changed && !sections_changed && !references_changed &&
             !scripts_changed;
    case RefinementFamily::instruction_text:
      return !description_changed && !metadata_changed && !references_changed &&
             !scripts_changed;
    case RefinementFamily::redistribution:
      return !description_changed && !metadata_changed && !scripts_changed;
    case RefinementFamily::script_edit:
      return !description_changed && !metadata_changed && !sections_changed &&
             !references_changed;
  }
  return false;
}

namespace {

std::string attempt_feedback(const std::vector<AttemptRecord>& records) {
  if (records.empty()) return "first attempt, no measurements yet";
  const AttemptRecord& last = records.back();
  if (!last.has_content) {
    return "attempt " + std::to_string(last.attempt_index) +
           " produced no valid variant";
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "attempt %d: mean delta %+.4f, lcb %+.4f, gate %s",
                last.attempt_index, last.mean_delta, last.lcb,
                last.gate_passed ? "passed" : "failed");
  return buf;
}

}  // namespace

std::vector<AttemptRecord> refine(const ContentState& aligned, const Structure& structure,
                                  RefinementFamily family, Advisor& advisor,
                                  const Profile& profile, Evaluator& evaluator,
                                  DrawSequence& draws, const RefinementBudget& budget,
                                  double baseline_reward, const BudgetPolicy& policy) {
  if (budget.max_attempts < 1 || budget.variants_per_attempt < 1) {
    raise(errc::domain_error, "refinement budget must allow at least one attempt");
  }
  std::vector<AttemptRecord> records;
  ContentState current = aligned;
  bool stopped = false;

  for (int m = 1; m <= budget.max_attempts && !stopped; ++m) {
    std::vector<ContentState> variants;
    std::vector<double> rewards;
    std::vector<double> deltas;
    std::vector<std::string> diags;

    for (int v = 0; v < budget.variants_per_attempt; ++v) {
      std::optional<ContentState> candidate;
      try {
        candidate =
            advisor.refine_variant(family, current, structure, profile,
                                   attempt_feedback(records));
      } catch (const Error& e) {
        if (e.code() == errc::family_violation || e.code() == errc::bad_params) {
          continue;
        }
        throw;
      }
      if (!candidate) {
        stopped = true;
        break;
      }
      try {
        const SkillPackage pkg = recompose(*candidate, structure);
        if (!validate(pkg, policy).valid) continue;
      } catch (const Error& e) {
        if (e.code() == errc::incompatible_content) continue;
        throw;
      }
      if (!family_allows_edit(current, *candidate, family)) continue;
      const EvalOutcome outcome =
          evaluator.evaluate(structure, *candidate, draws.take());
      variants.push_back(std::move(*candidate));
      rewards.push_back(outcome.reward);
      deltas.push_back(outcome.reward - baseline_reward);
      diags.push_back(outcome.diagnostics);
    }

    if (variants.empty()) {
      if (stopped) break;
      AttemptRecord rec;
      rec.attempt_index = m;
      rec.content = current;
      rec.has_content = false;
      rec.diagnostics = "all variants invalid";
      records.push_back(std::move(rec));
      continue;
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < deltas.size(); ++i) {
      if (deltas[i] > deltas[best]) best = i;
    }

    AttemptRecord rec;
    rec.attempt_index = m;
    rec.content = variants[best];
    rec.deltas = deltas;
    rec.mean_delta = 0.0;
    for (double d : deltas) rec.mean_delta += d;
    rec.mean_delta /= static_cast<double>(deltas.size());
    rec.sample_sd = sample_stddev(deltas);
    rec.lcb = lcb(deltas, budget.t_crit);
    rec.gate_passed = rec.lcb >= 0.0;
    std::size_t positive = 0;
    for (double d : deltas) {
      if (d > 0.0) ++positive;
    }
    const double k = static_cast<double>(deltas.size());
    rec.confidence = (k / (k + 1.0)) * (static_cast<double>(positive) / k);
    rec.reward = rewards[best];
    rec.diagnostics = diags[best];
    current = rec.content;
    records.push_back(std::move(rec));
  }
  return records;
}

const AttemptRecord& rank_and_select(const std::vector<AttemptRecord>& records) {
  const AttemptRecord* best = nullptr;
  for (const auto& rec : records) {
    if (!rec.has_content) continue;
    if (!best) {
      best = &rec;
      continue;
    }
    if (rec.gate_passed != best->gate_passed) {
      if (rec.gate_passed) best = &rec;
      continue;
    }
    if (rec.mean_delta != best->mean_delta) {
      if (rec.mean_delta > best->mean_delta) best = &rec;
      continue;
    }
    if (rec.confidence != best->confidence) {
      if (rec.confidence > best->confidence) best = &rec;
      continue;
    }
    if (rec.attempt_index < best->attempt_index) best = &rec;
  }
  if (!best) raise(errc::no_valid_attempts, "no attempt produced valid content");
  return *best;
}

}  // namespace skillopt
