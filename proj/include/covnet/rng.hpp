#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace covnet {

// splitmix64 finalizer; decorrelates nearby seeds before they reach the
// main generator.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One generator per (seed, stream) pair. Workers that own distinct streams
// (optimizer restarts, simulation phases) produce the same draws no matter
// how they are scheduled.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix64(mix64(seed) ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
}

// Uniform double in [0, 1). std::uniform_real_distribution is not pinned
// down by the standard, so the conversion is done by hand.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer draw in [0, n).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

}  // namespace covnet
