#pragma once

namespace skillopt {

// Which slice of a package's content an inner refinement pass may touch.
// Families keep content refinement local to the components the structural
// edit disturbed.
enum class RefinementFamily {
  metadata_light,
  metadata_routing_text,
  instruction_text,
  redistribution,
  script_edit,
};

const char* family_name(RefinementFamily family);

}  // namespace skillopt
