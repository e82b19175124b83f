#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drisk/model.hpp"
#include "drisk/random.hpp"

namespace drisk {

/// log of the integral of Poisson(f; s omega) against Gamma(omega; shape, rate),
/// where s = pi * xi.
double marginal_cell_loglik(double f, double scaled_xi, double shape, double rate);

/// Predictive log mass of f for a cell joining a cluster whose other members
/// contribute sum_f counts and sum_xi scaled predictors.
double conditional_cell_loglik(double f, double scaled_xi, double sum_f, double sum_xi,
                               double shape, double rate);

/// Joint marginal log-likelihood of every cell in one cluster sharing a
/// single Gamma-distributed effect.
double cluster_joint_loglik(std::span<const double> f, std::span<const double> scaled_xi,
                            double shape, double rate);

/// Log mass of a labelled partition with the given cluster sizes under the
/// Ewens distribution with mass m.
double partition_log_prior(std::span<const std::size_t> sizes, double mass);

/// Per-cluster sufficient statistics.
struct ClusterStats {
  std::vector<std::size_t> size;
  std::vector<double> sum_f;
  std::vector<double> sum_xi;

  static ClusterStats compute(std::span<const double> f, std::span<const double> scaled_xi,
                              std::span<const std::uint32_t> allocation, std::size_t num_clusters);

  /// Integer fields equal, real sums within rel_tol.
  bool matches(const ClusterStats& other, double rel_tol = 1e-9) const;
};

enum class ScanOrder { Ascending, RandomPermutation };

struct ReallocationOptions {
  ScanOrder scan = ScanOrder::Ascending;
  /// Recompute the incrementally maintained statistics after the sweep and
  /// throw if they drifted.
  bool audit = false;
};

/// One collapsed Gibbs sweep over the allocations (conjugate Gamma base
/// measure). Labels are recompacted in order of first appearance. Clusters
/// that survive keep their effect; new clusters get their posterior mean, to
/// be refreshed by redraw_cluster_effects.
void gibbs_reallocate(std::span<const double> f, std::span<const double> scaled_xi,
                      ModelState& state, const Priors& priors, Rng& rng,
                      const ReallocationOptions& options = {});
void gibbs_reallocate(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                      Rng& rng, const ReallocationOptions& options = {});

/// omega_j ~ Gamma(shape + sum_f_j, rate + sum_xi_j) independently.
void redraw_cluster_effects(std::span<const double> f, std::span<const double> scaled_xi,
                            ModelState& state, const Priors& priors, Rng& rng);
void redraw_cluster_effects(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                            Rng& rng);

/// One auxiliary-variable draw of the DP mass given the number of clusters.
double sample_mass(std::size_t num_clusters, std::size_t num_cells, double previous_mass,
                   const Priors& priors, Rng& rng);

namespace detail {
/// marginal_cell_loglik minus the terms that depend on the cell only
/// (f log s - log f!). Cheap for small integer f.
double predictive_kernel(double f, double scaled_xi, double shape, double rate);
}  // namespace detail

}  // namespace drisk
