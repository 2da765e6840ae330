#pragma once

#include <cmath>
#include <cstdint>

namespace emukf {

// Counter-based random number generation. Every draw is a pure function of
// (seed, stream, counters), so values do not depend on evaluation order and
// parallel code reproduces serial results bit-exactly.

/// Purpose tags keeping independent random streams from colliding.
enum class RngStream : std::uint64_t {
  kObsNoise = 1,
  kEnsembleInit = 2,
  kAdditiveInflation = 3,
  kMlpInit = 4,
  kMlpShuffle = 5,
};

/// SplitMix64 finalizer, used as the mixing stage of the keyed generator.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Hashes (seed, stream, c0, c1, c2) to a uniform 64-bit word.
constexpr std::uint64_t counter_hash(std::uint64_t seed, RngStream stream,
                                     std::uint64_t c0, std::uint64_t c1 = 0,
                                     std::uint64_t c2 = 0) {
  std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC908ull);
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  h = mix64(h ^ c0);
  h = mix64(h ^ c1);
  h = mix64(h ^ c2);
  return h;
}

/// Uniform draw in (0, 1]; never returns 0 so log() is safe.
inline double counter_uniform(std::uint64_t seed, RngStream stream,
                              std::uint64_t c0, std::uint64_t c1 = 0,
                              std::uint64_t c2 = 0) {
  const std::uint64_t h = counter_hash(seed, stream, c0, c1, c2);
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal draw via Box-Muller on two counter sub-draws.
inline double counter_normal(std::uint64_t seed, RngStream stream,
                             std::uint64_t c0, std::uint64_t c1 = 0,
                             std::uint64_t c2 = 0) {
  const double u1 = counter_uniform(seed, stream, c0, c1, 2 * c2);
  const double u2 = counter_uniform(seed, stream, c0, c1, 2 * c2 + 1);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Per-stage seed derivation from the experiment master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, RngStream stream) {
  return mix64(master ^ (0xD1B54A32D192ED03ull * static_cast<std::uint64_t>(stream)));
}

}  // namespace emukf
