#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skillopt/errors.hpp"
#include "skillopt/manifest.hpp"

namespace skillopt {

// Shared exit-code convention: 0 success, 1 failed validation or runtime
// failure, 2 unreadable or malformed input.
int exit_code_for(const Error& error);

// Parses and validates one skill directory, printing every issue.
int cmd_validate(const std::filesystem::path& skill_dir, std::ostream& out,
                 std::ostream& err);

// Full optimization run; writes best_skill/, tree.json, tree.dot,
// round_log.jsonl, advisor_log.jsonl and report.json into the manifest's
// output_dir. Reruns are byte-identical for a fixed manifest.
int cmd_optimize(const RunManifest& manifest, std::ostream& out, std::ostream& err);

// Runs several configurations against one shared evaluation protocol:
// per-config search, one confirmation scoring per finished candidate on
// held-out draws, winner by confirmation score, then a single test scoring of
// the winner and the seed. Individual run failures are recorded, not fatal.
int cmd_sweep(const std::vector<RunManifest>& configs,
              const std::filesystem::path& output_dir, std::ostream& out,
              std::ostream& err);

// Scores the manifest's skill once on the chosen phase ("search", "confirm"
// or "test") without searching.
int cmd_evaluate(const RunManifest& manifest, const std::string& phase, std::ostream& out,
                 std::ostream& err);

// Re-renders a stored search tree. `input` is either a tree.json file or a
// run directory containing one; format is "structured" or "dot".
int cmd_export_tree(const std::filesystem::path& input, const std::string& format,
                    const std::optional<std::filesystem::path>& out_file, std::ostream& out,
                    std::ostream& err);

}  // namespace skillopt
