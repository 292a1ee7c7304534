#pragma once

#include <cstdint>
#include <random>

namespace skillopt {

// All stochastic behaviour in the library flows through these helpers so that
// runs are reproducible bit for bit across platforms. std::mt19937_64 has a
// pinned output sequence by the standard; the distributions in <random> do
// not, hence the hand-written mappings below.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

double gaussian(std::mt19937_64& rng);

}  // namespace skillopt
