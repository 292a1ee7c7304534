#include "skillopt/digest.hpp"

#include <cstdio>

namespace skillopt {

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf, 16);
}

}  // namespace skillopt
