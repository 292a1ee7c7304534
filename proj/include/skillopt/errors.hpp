#pragma once

#include <stdexcept>
#include <string>

namespace skillopt {

enum class errc {
  missing_skill_md,
  malformed_frontmatter,
  duplicate_heading,
  unrecognized_top_level_entry,
  bad_path,
  structure_mismatch,
  incompatible_content,
  inadmissible_action,
  bad_params,
  domain_error,
  empty_tree,
  unknown_node,
  seed_invalid,
  bridge_failure,
  empty_deltas,
  no_valid_attempts,
  family_violation,
  insufficient_data,
  empty_instance_set,
  id_mismatch,
  runner_failure,
  evaluator_failure,
  advisor_failure,
  out_of_catalog,
  io_error,
  bad_manifest,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
public:
  Error(errc code, const std::string& message);
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] void raise(errc code, const std::string& message);

}  // namespace skillopt
