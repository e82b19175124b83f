#pragma once

// Synthetic populations with a known log-linear structure, and pi-fraction
// samples drawn from them with the true risks attached.

#include <cstdint>
#include <string>
#include <vector>

#include "drisk/design.hpp"
#include "drisk/random.hpp"
#include "drisk/risk.hpp"
#include "drisk/table.hpp"

namespace drisk {

struct SynthConfig {
  KeySchema schema;
  DesignKind design = DesignKind::Independence;
  /// Coefficients on `design` (treatment coding, no intercept). Empty means 0.
  std::vector<double> beta;

  enum class Effects { Clusters, Gamma };
  Effects effects = Effects::Clusters;
  /// Point masses of the effect distribution and their weights.
  std::vector<double> cluster_effects{1.0};
  std::vector<double> cluster_weights{1.0};
  double gamma_shape = 1.0;  ///< mean-one Gamma when shape == rate
  double gamma_rate = 1.0;

  std::uint64_t population_size = 10000;
  double pi = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
  static SynthConfig from_json(const std::string& text);
};

struct SyntheticPopulation {
  KeySchema schema;
  std::vector<double> lambda;  ///< expected population count per cell
  std::vector<double> omega;   ///< planted multiplicative effect per cell
  std::vector<std::pair<CellId, Count>> counts;  ///< nonzero F_k
  Count total = 0;
};

/// lambda_k = N xi_k omega_k / sum_j xi_j omega_j, F_k ~ Poisson(lambda_k).
SyntheticPopulation synth_population(const SynthConfig& config, Rng& rng);

struct SyntheticSample {
  ContingencyTable table;  ///< sample counts with the population attached
  TrueRisks truth;
};

/// Keeps each individual independently with probability pi.
SyntheticSample draw_sample(const SyntheticPopulation& population, double pi, Rng& rng);

}  // namespace drisk
