#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace skillopt {

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex_digest(std::string_view bytes);

}  // namespace skillopt
