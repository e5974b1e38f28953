#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace desocial {

using Rng = std::mt19937_64;

/// Stream tags keep random streams for different purposes from aliasing.
enum class StreamTag : std::uint64_t {
  Queries = 1,
  Selection = 2,
  RandomSelect = 3,
  Committee = 4,
  ValidatorInit = 5,
  Training = 6,
  CanonicalInit = 7,
  PerValidatorNegatives = 8,
  Synthetic = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a seed from (global seed, tag, entity, period). Distinct tuples give
/// independent streams; the result is independent of call order.
inline std::uint64_t derive_seed(std::uint64_t global, StreamTag tag, std::uint64_t entity = 0,
                                 std::uint64_t period = 0) {
  std::uint64_t h = splitmix64(global);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ entity);
  h = splitmix64(h ^ (period * 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_stream(std::uint64_t global, StreamTag tag, std::uint64_t entity = 0,
                       std::uint64_t period = 0) {
  return Rng(derive_seed(global, tag, entity, period));
}

/// Uniform double in [0,1) with 53 random bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound) by rejection; identical on every platform.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

}  // namespace desocial
