#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "drisk/design.hpp"
#include "drisk/table.hpp"

namespace drisk {

/// Hyperparameters. beta_variance is the per-component variance of the
/// centred Gaussian prior on beta; the base measure is Gamma(shape, rate) on
/// omega = exp(phi); the DP mass has a Gamma(shape, rate) prior.
struct Priors {
  double beta_variance = 10.0;
  double base_shape = 1.0;
  double base_rate = 0.1;
  double mass_shape = 1.0;
  double mass_rate = 0.1;

  void validate() const;
};

/// One sampler state. Cells are indexed by design row; allocation[i] names
/// the cluster whose multiplicative effect applies to row i.
struct ModelState {
  std::vector<double> beta;
  std::vector<std::uint32_t> allocation;
  std::vector<double> cluster_effects;
  double mass = 1.0;

  std::size_t num_clusters() const noexcept { return cluster_effects.size(); }
  double effect_of(std::size_t row) const { return cluster_effects[allocation[row]]; }

  /// Throws if labels are not contiguous, a cluster is empty or an effect is
  /// not positive.
  void validate(std::size_t num_rows, std::size_t num_columns) const;

  /// Every row in its own cluster.
  static ModelState singletons(std::vector<double> beta, std::vector<double> effects);

  bool operator==(const ModelState&) const = default;
};

/// Poisson log-linear likelihood f_k ~ Poisson(pi xi_k omega_k) over the
/// active cells of a design.
class PoissonLogLinear {
 public:
  PoissonLogLinear(const ContingencyTable& table, DesignMatrix design);

  const DesignMatrix& design() const noexcept { return design_; }
  std::size_t num_rows() const noexcept { return design_.num_rows(); }
  std::size_t num_columns() const noexcept { return design_.num_columns(); }
  double sampling_fraction() const noexcept { return pi_; }
  std::span<const double> counts() const noexcept { return counts_; }
  std::span<const double> log_factorials() const noexcept { return log_factorials_; }

  /// pi * exp(w_i' beta) per row.
  void scaled_predictor(std::span<const double> beta, std::span<double> out) const;
  std::vector<double> scaled_predictor(std::span<const double> beta) const;

  /// sum_i f_i log(mu_i) - mu_i - log f_i! with mu_i = pi xi_i omega_i.
  double log_likelihood(std::span<const double> beta, std::span<const double> omega) const;

 private:
  DesignMatrix design_;
  double pi_;
  std::vector<double> counts_;
  std::vector<double> log_factorials_;
};

double log_likelihood(const PoissonLogLinear& model, const ModelState& state);

/// Per-row omega_{alloc(i)}.
std::vector<double> cell_effects(const ModelState& state);

struct BetaDerivatives {
  Eigen::VectorXd gradient;  ///< of the log posterior in beta
  Eigen::MatrixXd metric;    ///< Fisher information plus prior precision
  double log_posterior = 0.0;
};

BetaDerivatives grad_fisher_beta(const PoissonLogLinear& model, std::span<const double> beta,
                                 std::span<const double> omega, const Priors& priors);
BetaDerivatives grad_fisher_beta(const PoissonLogLinear& model, const ModelState& state,
                                 const Priors& priors);

/// Log posterior of beta given the cell effects (likelihood plus prior).
double log_posterior_beta(const PoissonLogLinear& model, std::span<const double> beta,
                          std::span<const double> omega, const Priors& priors);

double log_prior_beta(std::span<const double> beta, double variance);

/// Log density of phi = log(omega), omega ~ Gamma(shape, rate).
double log_base_measure(double phi, double shape, double rate);

/// Lower Cholesky factor. Throws NumericalDegeneracy naming the first
/// non-positive pivot.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m);

}  // namespace drisk
