#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace drisk {

using Rng = std::mt19937_64;

// Distribution objects are built per call so that the engine is the only
// sampling state. This keeps checkpoints exact.

inline double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma with shape/rate parameterization.
inline double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double draw_beta(Rng& rng, double alpha, double beta) {
  const double x = draw_gamma(rng, alpha, 1.0);
  const double y = draw_gamma(rng, beta, 1.0);
  return x / (x + y);
}

inline std::uint64_t draw_poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return static_cast<std::uint64_t>(std::poisson_distribution<std::int64_t>(mean)(rng));
}

inline std::uint64_t draw_binomial(Rng& rng, std::uint64_t trials, double p) {
  if (trials == 0 || p <= 0.0) return 0;
  return static_cast<std::uint64_t>(
      std::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(trials), p)(rng));
}

/// Derives an independent stream seed for a numbered sub-stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x64726973u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace drisk
