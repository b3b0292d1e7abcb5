#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace mcmix {

using Rng = std::mt19937_64;

/// Independent stream identifiers. Each phase of a run draws from its own
/// engine so that, e.g., enforcement randomness does not depend on how many
/// numbers training consumed.
enum class Stream : std::uint64_t {
  split = 1,
  init = 2,
  batch = 3,
  mix = 4,
  enforce = 5,
  synth = 6,
};

/// splitmix64 finalizer over (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

/// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Beta(a, b) as a ratio of gammas.
inline double beta_variate(Rng& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace mcmix
