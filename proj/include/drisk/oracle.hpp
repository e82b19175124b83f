#pragma once

// Brute-force references used to validate the samplers. Exponential time by
// construction; intended for tiny problems.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "drisk/random.hpp"

namespace drisk::oracle {

/// A set partition of {0..K-1} as a restricted growth string: element i
/// belongs to block label[i], and labels appear in increasing order.
using Partition = std::vector<std::uint32_t>;

inline constexpr std::size_t kMaxEnumerable = 10;

std::uint64_t bell_number(std::size_t k);

/// Every set partition of k elements, in lexicographic order. k <= 10.
std::vector<Partition> enumerate_partitions(std::size_t k);

std::vector<std::size_t> block_sizes(const Partition& p);

/// Unnormalized log weight: Ewens prior mass times one-shot cluster
/// marginal likelihoods.
double partition_log_weight(const Partition& p, std::span<const double> f,
                            std::span<const double> scaled_xi, double mass, double shape,
                            double rate);

/// The same weight assembled sequentially from Polya-urn predictive terms.
double partition_log_weight_sequential(const Partition& p, std::span<const double> f,
                                       std::span<const double> scaled_xi, double mass,
                                       double shape, double rate);

struct PartitionPosterior {
  std::vector<Partition> partitions;
  std::vector<double> probability;
};

/// Exact posterior over partitions with beta (through scaled_xi) and mass
/// fixed. K <= 8.
PartitionPosterior exact_partition_posterior(std::span<const double> f,
                                             std::span<const double> scaled_xi, double mass,
                                             double shape, double rate);

/// Adaptive Gauss-Kronrod quadrature; hi may be +infinity. Throws
/// ConvergenceError when the error estimate exceeds tol relative to the
/// result (absolute when the result is below 1).
double quadrature(const std::function<double(double)>& fn, double lo, double hi,
                  double tol = 1e-10);

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean and standard error of statistic(rng) over n independent draws.
McEstimate mc_reference(std::size_t n, Rng& rng, const std::function<double(Rng&)>& statistic);

/// Unnormalized log posterior of the DP mass given c clusters among k cells
/// under a Gamma(shape, rate) prior.
double mass_log_posterior(double mass, std::size_t clusters, std::size_t cells, double shape,
                          double rate);

}  // namespace drisk::oracle
