#include "skillopt/errors.hpp"

namespace skillopt {

const char* errc_name(errc code) {
  switch (code) {
    case errc::missing_skill_md: return "MissingSkillMd";
    case errc::malformed_frontmatter: return "MalformedFrontmatter";
    case errc::duplicate_heading: return "DuplicateHeading";
    case errc::unrecognized_top_level_entry: return "UnrecognizedTopLevelEntry";
    case errc::bad_path: return "BadPath";
    case errc::structure_mismatch: return "StructureMismatch";
    case errc::incompatible_content: return "IncompatibleContent";
    case errc::inadmissible_action: return "InadmissibleAction";
    case errc::bad_params: return "BadParams";
    case errc::domain_error: return "DomainError";
    case errc::empty_tree: return "EmptyTree";
    case errc::unknown_node: return "UnknownNode";
    case errc::seed_invalid: return "SeedInvalid";
    case errc::bridge_failure: return "BridgeFailure";
    case errc::empty_deltas: return "EmptyDeltas";
    case errc::no_valid_attempts: return "NoValidAttempts";
    case errc::family_violation: return "FamilyViolation";
    case errc::insufficient_data: return "InsufficientData";
    case errc::empty_instance_set: return "EmptyInstanceSet";
    case errc::id_mismatch: return "IdMismatch";
    case errc::runner_failure: return "RunnerFailure";
    case errc::evaluator_failure: return "EvaluatorFailure";
    case errc::advisor_failure: return "AdvisorFailure";
    case errc::out_of_catalog: return "OutOfCatalog";
    case errc::io_error: return "IoError";
    case errc::bad_manifest: return "BadManifest";
  }
  return "UnknownError";
}

Error::Error(errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void raise(errc code, const std::string& message) { throw Error(code, message); }

}  // namespace skillopt
