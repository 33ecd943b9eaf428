#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>

namespace stablesim {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a seed from a base seed and a sequence of stream labels (run id, agent index, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t s = mix_seed(base);
  for (std::uint64_t l : labels) s = mix_seed(s ^ mix_seed(l + 0x632BE59BD9B4E019ULL));
  return s;
}

// The standard distributions are implementation-defined; these keep streams
// bit-identical across standard libraries.
inline double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) noexcept {
  // Box-Muller, one draw per call so the number of engine calls is fixed.
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace stablesim
