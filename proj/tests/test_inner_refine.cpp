#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillopt/advisor.hpp"
#include "skillopt/errors.hpp"
#include "skillopt/evaluation.hpp"
#include "skillopt/inner_refine.hpp"
#include "skillopt/structure_edits.hpp"

using namespace skillopt;
using nlohmann::json;

namespace {

errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return errc::io_error;
}

EditAction act(EditKind kind, std::map<std::string, std::string> params = {}) {
  EditAction a;
  a.kind = kind;
  a.params = std::move(params);
  return a;
}

Structure base_structure() {
  Structure s;
  s.section_headings = {"Steps", "Notes"};
  s.reference_paths = {"references/table.md"};
  s.frontmatter_keys = {"name", "description"};
  return s;
}

ContentState base_content() {
  ContentState c;
  c.frontmatter.name = "mini";
  c.frontmatter.description = "does one thing";
  c.frontmatter.key_order = {"name", "description"};
  c.section_bodies = {{"Steps", "step text"}, {"Notes", "note text"}};
  c.reference_texts = {{"references/table.md", "the table"}};
  return c;
}

}  // namespace

TEST_CASE("families dispatch by edit kind with composite priority") {
  CHECK(dispatch_family(act(EditKind::add_script, {{"path", "scripts/x.py"}})) ==
        RefinementFamily::script_edit);
  CHECK(dispatch_family(act(EditKind::inline_reference)) ==
        RefinementFamily::redistribution);
  CHECK(dispatch_family(act(EditKind::extract_to_reference)) ==
        RefinementFamily::redistribution);
  CHECK(dispatch_family(act(EditKind::add_reference)) ==
        RefinementFamily::redistribution);
  CHECK(dispatch_family(act(EditKind::add_section)) ==
        RefinementFamily::instruction_text);
  CHECK(dispatch_family(act(EditKind::rename_section)) ==
        RefinementFamily::instruction_text);
  CHECK(dispatch_family(act(EditKind::reorder_sections)) ==
        RefinementFamily::instruction_text);
  CHECK(dispatch_family(act(EditKind::revise_description)) ==
        RefinementFamily::metadata_routing_text);
  CHECK(dispatch_family(act(EditKind::edit_metadata_keys)) ==
        RefinementFamily::metadata_light);
  CHECK(dispatch_family(act(EditKind::add_asset)) ==
        RefinementFamily::metadata_light);

  const std::vector<EditAction> composite = {
      act(EditKind::revise_description),
      act(EditKind::inline_reference),
  };
  CHECK(dispatch_family(composite) == RefinementFamily::redistribution);

  const std::vector<EditAction> heavy = {
      act(EditKind::inline_reference),
      act(EditKind::add_script),
  };
  CHECK(dispatch_family(heavy) == RefinementFamily::script_edit);
}

TEST_CASE("sample_stddev and lcb match their formulas") {
  CHECK(sample_stddev({}) == 0.0);
  CHECK(sample_stddev({0.5}) == 0.0);
  CHECK(sample_stddev({0.02, 0.04, 0.06}) == doctest::Approx(0.02).epsilon(1e-12));

  CHECK(lcb({0.02, 0.04, 0.06}, 1.0) ==
        doctest::Approx(0.028452994616207485).epsilon(1e-12));
  CHECK(lcb({0.05}, 1.833) == 0.05);
  CHECK(lcb({-0.01}, 0.0) == -0.01);
  CHECK(code_of([] { lcb({}, 1.0); }) == errc::empty_deltas);
}

TEST_CASE("align_content carries, stubs and routes text through edits") {
  const auto s0 = base_structure();
  const auto c0 = base_content();

  SUBCASE("identity") {
    const auto out = align_content(c0, s0, s0, CarriedNote{});
    CHECK(out == c0);
  }

  SUBCASE("added section gets a stub") {
    const auto edit = apply_edit(s0, act(EditKind::add_section, {{"heading", "Tips"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.section_bodies.at("Tips") == kSectionStub);
    CHECK(out.section_bodies.at("Steps") == "step text");
  }

  SUBCASE("removed section drops its body") {
    const auto edit =
        apply_edit(s0, act(EditKind::remove_section, {{"heading", "Notes"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.section_bodies.count("Notes") == 0);
  }

  SUBCASE("renamed section keeps its body") {
    const auto edit = apply_edit(
        s0, act(EditKind::rename_section, {{"from", "Steps"}, {"to", "Procedure"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.section_bodies.at("Procedure") == "step text");
    CHECK(out.section_bodies.count("Steps") == 0);
  }

  SUBCASE("inlined reference text lands in a fresh target section") {
    const auto edit = apply_edit(
        s0, act(EditKind::inline_reference,
                {{"path", "references/table.md"}, {"into", "Lookup"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.section_bodies.at("Lookup") == "the table");
    CHECK(out.reference_texts.count("references/table.md") == 0);
  }

  SUBCASE("inlined reference text appends to a non-empty target") {
    const auto edit = apply_edit(
        s0, act(EditKind::inline_reference,
                {{"path", "references/table.md"}, {"into", "Steps"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.section_bodies.at("Steps") == "step text\n\nthe table");
  }

  SUBCASE("extraction moves the body and leaves a pointer") {
    const auto edit = apply_edit(
        s0, act(EditKind::extract_to_reference,
                {{"section", "Notes"}, {"path", "references/notes.md"}}));
    const auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.reference_texts.at("references/notes.md") == "note text");
    CHECK(out.section_bodies.at("Notes") == "See references/notes.md.");
  }

  SUBCASE("metadata, script and asset churn") {
    auto edit = apply_edit(s0, act(EditKind::edit_metadata_keys,
                                   {{"add", "compatibility"}}));
    auto out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(frontmatter_value(out.frontmatter, "compatibility") == kMetadataStub);

    edit = apply_edit(s0, act(EditKind::add_script, {{"path", "scripts/run.py"}}));
    out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.script_texts.at("scripts/run.py") == kScriptStub);

    edit = apply_edit(s0, act(EditKind::add_asset, {{"path", "assets/a.bin"}}));
    out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.asset_blobs.at("assets/a.bin") == "");

    edit = apply_edit(s0, act(EditKind::add_reference,
                              {{"path", "references/more.md"}}));
    out = align_content(c0, s0, edit.structure, edit.note);
    CHECK(out.reference_texts.at("references/more.md") == kReferenceStub);
  }

  SUBCASE("notes that disagree with the structures fail the bridge") {
    CarriedNote lying;
    lying.renamed_sections = {{"Ghost", "Phantom"}};
    CHECK(code_of([&] { align_content(c0, s0, s0, lying); }) ==
          errc::bridge_failure);

    auto grown = s0;
    grown.section_headings.push_back("Extra");
    CHECK(code_of([&] { align_content(c0, s0, grown, CarriedNote{}); }) ==
          errc::bridge_failure);
  }
}

TEST_CASE("family_allows_edit confines changes to the family's surface") {
  const auto s = base_structure();
  const auto before = base_content();

  auto after = before;
  set_frontmatter_value(after.frontmatter, "description", "changed");
  CHECK(family_allows_edit(before, after, RefinementFamily::metadata_routing_text));
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::metadata_light));
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::instruction_text));

  after = before;
  after.frontmatter.name = "renamed";
  for (auto family :
       {RefinementFamily::metadata_light, RefinementFamily::metadata_routing_text,
        RefinementFamily::instruction_text, RefinementFamily::redistribution,
        RefinementFamily::script_edit}) {
    CHECK_FALSE(family_allows_edit(before, after, family));
  }

  after = before;
  after.section_bodies["Steps"] = "rewritten";
  CHECK(family_allows_edit(before, after, RefinementFamily::instruction_text));
  CHECK(family_allows_edit(before, after, RefinementFamily::redistribution));
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::metadata_light));
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::script_edit));

  after = before;
  after.reference_texts["references/table.md"] = "new table";
  CHECK(family_allows_edit(before, after, RefinementFamily::redistribution));
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::instruction_text));

  after = before;
  after.asset_blobs["assets/x"] = "data";
  CHECK_FALSE(family_allows_edit(before, after, RefinementFamily::metadata_light));

  CHECK(family_allows_edit(before, before, RefinementFamily::script_edit));
}

TEST_CASE("refine evaluates variants, gates on the LCB and honors stop") {
  Structure structure;
  structure.section_headings = {"Steps"};
  structure.frontmatter_keys = {"name", "description"};
  ContentState content;
  content.frontmatter.name = "mini";
  content.frontmatter.description = "does one thing";
  content.frontmatter.key_order = {"name", "description"};
  content.section_bodies = {{"Steps", "step text"}};

  SyntheticLandscape landscape;
  landscape.base_reward = 0.5;
  landscape.bonuses = {{"body_contains:triage", 0.1}};
  SyntheticEvaluator evaluator(landscape);

  json playbook = {
      {"profile", "task_summary: t"},
      {"rounds", json::array()},
      {"refine",
       {{"InstructionText",
         json::array({"op: set_section\nheading: Steps\ntext: triage first",
                      "op: set_section\nheading: Steps\ntext: then recompute",
                      "op: stop"})}}}};
  ScriptedAdvisor advisor(playbook);

  DrawSequence draws;
  RefinementBudget budget;
  budget.max_attempts = 2;
  budget.variants_per_attempt = 2;
  budget.t_crit = 1.833;

  const auto records = refine(content, structure, RefinementFamily::instruction_text,
                              advisor, Profile{}, evaluator, draws, budget, 0.5);
  REQUIRE(records.size() == 1);
  const auto& rec = records[0];
  CHECK(rec.attempt_index == 1);
  CHECK(rec.has_content);
  REQUIRE(rec.deltas.size() == 2);
  CHECK(rec.deltas[0] == doctest::Approx(0.1));
  CHECK(rec.deltas[1] == doctest::Approx(0.0));
  CHECK(rec.mean_delta == doctest::Approx(0.05));
  CHECK(rec.lcb < 0.0);
  CHECK_FALSE(rec.gate_passed);
  CHECK(rec.confidence == doctest::Approx(2.0 / 3.0 * 0.5));
  CHECK(rec.reward == doctest::Approx(0.6));
  CHECK(rec.content.section_bodies.at("Steps") == "triage first");
  CHECK(draws.next == 2);

  const auto& chosen = rank_and_select(records);
  CHECK(&chosen == &records[0]);
}

TEST_CASE("a single positive variant passes the gate at any t_crit") {
  Structure structure;
  structure.section_headings = {"Steps"};
  structure.frontmatter_keys = {"name", "description"};
  ContentState content;
  content.frontmatter.name = "mini";
  content.frontmatter.description = "d";
  content.frontmatter.key_order = {"name", "description"};
  content.section_bodies = {{"Steps", "step text"}};

  SyntheticLandscape landscape;
  landscape.base_reward = 0.5;
  landscape.bonuses = {{"body_contains:triage", 0.1}};
  SyntheticEvaluator evaluator(landscape);

  json playbook = {
      {"refine",
       {{"InstructionText",
         json::array({"op: set_section\nheading: Steps\ntext: triage first"})}}}};
  ScriptedAdvisor advisor(playbook);

  DrawSequence draws;
  RefinementBudget budget;
  budget.max_attempts = 1;
  budget.variants_per_attempt = 1;
  budget.t_crit = 1.833;

  const auto records = refine(content, structure, RefinementFamily::instruction_text,
                              advisor, Profile{}, evaluator, draws, budget, 0.5);
  REQUIRE(records.size() == 1);
  CHECK(records[0].gate_passed);
  CHECK(records[0].lcb == doctest::Approx(0.1));
  CHECK(records[0].sample_sd == 0.0);
}

TEST_CASE("invalid variants are discarded and recorded as empty attempts") {
  const auto structure = base_structure();
  const auto content = base_content();

  SyntheticLandscape landscape;
  SyntheticEvaluator evaluator(landscape);

  json playbook = {
      {"refine",
       {{"InstructionText",
         json::array({"op: set_description\ntext: not allowed here",
                      "op: set_section\nheading: Ghost\ntext: no such section"})}}}};
  ScriptedAdvisor advisor(playbook);

  DrawSequence draws;
  RefinementBudget budget;
  budget.max_attempts = 1;
  budget.variants_per_attempt = 2;

  const auto records = refine(content, structure, RefinementFamily::instruction_text,
                              advisor, Profile{}, evaluator, draws, budget, 0.5);
  REQUIRE(records.size() == 1);
  CHECK_FALSE(records[0].has_content);
  CHECK(records[0].deltas.empty());
  CHECK(records[0].diagnostics == "all variants invalid");
  CHECK(draws.next == 0);

  CHECK(code_of([&] { rank_and_select(records); }) == errc::no_valid_attempts);
  CHECK(code_of([] { rank_and_select({}); }) == errc::no_valid_attempts);
}

TEST_CASE("rank_and_select orders by gate, mean delta, confidence, attempt") {
  auto rec = [](int attempt, bool gate, double mean, double conf) {
    AttemptRecord r;
    r.attempt_index = attempt;
    r.gate_passed = gate;
    r.mean_delta = mean;
    r.confidence = conf;
    return r;
  };

  std::vector<AttemptRecord> records = {rec(1, false, 0.5, 0.9), rec(2, true, 0.01, 0.1)};
  CHECK(rank_and_select(records).attempt_index == 2);

  records = {rec(1, true, 0.01, 0.5), rec(2, true, 0.02, 0.1)};
  CHECK(rank_and_select(records).attempt_index == 2);

  records = {rec(1, true, 0.02, 0.1), rec(2, true, 0.02, 0.5)};
  CHECK(rank_and_select(records).attempt_index == 2);

  records = {rec(2, true, 0.02, 0.5), rec(1, true, 0.02, 0.5)};
  CHECK(rank_and_select(records).attempt_index == 1);

  records = {rec(1, false, 0.3, 0.5), rec(2, false, 0.2, 0.5)};
  CHECK(rank_and_select(records).attempt_index == 1);
}

TEST_CASE("refine rejects a hopeless budget") {
  const auto structure = base_structure();
  const auto content = base_content();
  SyntheticLandscape landscape;
  SyntheticEvaluator evaluator(landscape);
  ScriptedAdvisor advisor(json::object());
  DrawSequence draws;
  RefinementBudget bad;
  bad.max_attempts = 0;
  CHECK(code_of([&] {
          refine(content, structure, RefinementFamily::instruction_text, advisor,
                 Profile{}, evaluator, draws, bad, 0.5);
        }) == errc::domain_error);
}
