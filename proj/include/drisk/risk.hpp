#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "drisk/random.hpp"
#include "drisk/samplers.hpp"
#include "drisk/table.hpp"

namespace drisk {

/// Per-cell posterior risks of a sample unique given its population mean:
/// tau1 = Pr(F = 1 | f = 1), tau2 = E(1/F | f = 1).
struct CellRisk {
  double tau1 = 1.0;
  double tau2 = 1.0;
};

/// Below this value of (1 - pi) lambda the series limit is used.
inline constexpr double kSeriesThreshold = 1e-8;

CellRisk cell_risk_closed_form(double lambda, double pi);

inline constexpr std::array<double, 5> kReportedPercentiles{2.5, 5.0, 50.0, 95.0, 97.5};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  std::array<double, 5> percentiles{};  ///< at kReportedPercentiles
};

/// Nearest-rank percentile of sorted values, p in [0, 100].
double nearest_rank(std::span<const double> sorted, double p);
Summary summarize(std::span<const double> values);

struct GlobalEstimates {
  Summary tau1;
  Summary tau2;
  std::vector<double> tau1_draws;  ///< per posterior draw
  std::vector<double> tau2_draws;
};

struct StarEstimates : GlobalEstimates {
  std::vector<CellId> cells;       ///< sample uniques
  std::vector<double> cell_tau1;   ///< posterior mean per unique
  std::vector<double> cell_tau2;
};

/// Monte Carlo tau*_i: per draw, the sum of closed-form cell risks over the
/// sample uniques; summaries over draws.
StarEstimates global_star_estimates(const PosteriorDraws& draws, double pi);

/// F = f + Poisson((1 - pi) lambda).
Count sample_population_count(double lambda, Count f, double pi, Rng& rng);

/// Fully Bayesian tau_i: per draw, population counts of the sample uniques are
/// simulated and tau_i recounted; summaries over draws.
GlobalEstimates global_full_bayes(const PosteriorDraws& draws, double pi, Rng& rng);

struct TrueRisks {
  double tau1 = 0.0;
  double tau2 = 0.0;
};

/// Recount from population counts. Throws without a population benchmark.
TrueRisks true_risks(const ContingencyTable& table);

/// Posterior variance of tau1 if cells were conditionally independent:
/// sum_k p_k (1 - p_k) with p_k the per-cell posterior mean of tau*_1k.
double independent_cells_tau1_variance(std::span<const double> cell_tau1);

enum class RiskMeasure { Tau1, Tau2 };

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_estimate = 0.0;  ///< mean per-cell estimate in the bin
  double mean_observed = 0.0;  ///< share of F = 1 (tau1) or mean 1/F (tau2)
};

/// Equal-width bins over [min, max] of the per-cell estimates; the last bin
/// is closed on the right.
std::vector<CalibrationBin> calibration_bins(std::span<const CellId> cells,
                                             std::span<const double> estimates,
                                             const ContingencyTable& table, RiskMeasure measure,
                                             std::size_t n_bins = 10);

}  // namespace drisk
