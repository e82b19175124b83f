#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drisk/dp_effects.hpp"
#include "drisk/model.hpp"
#include "drisk/random.hpp"
#include "drisk/table.hpp"

namespace drisk {

// ---------------------------------------------------------------------------
// Fixed effects

enum class StepOutcome { Accepted, Rejected, Aborted };

/// One simplified-manifold MALA update of beta with the Fisher metric plus
/// prior precision as preconditioner. omega holds the per-row effects. On
/// rejection or abort beta is left unchanged.
StepOutcome smmala_step(const PoissonLogLinear& model, std::vector<double>& beta,
                        std::span<const double> omega, const Priors& priors, double epsilon,
                        Rng& rng);
StepOutcome smmala_step(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                        double epsilon, Rng& rng);

/// Gaussian approximation to the posterior of beta at its mode.
struct LaplaceFit {
  Eigen::VectorXd mode;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd covariance_factor;  ///< lower Cholesky factor of covariance
  double gradient_norm = 0.0;         ///< sup-norm at the mode
  std::size_t iterations = 0;

  std::vector<double> draw(Rng& rng) const;
};

struct LaplaceOptions {
  double gradient_tolerance = 1e-7;
  std::size_t max_iterations = 5000;
  std::size_t history = 10;
};

/// Laplace fit for the Poisson model with the per-row effects held at omega.
LaplaceFit laplace_fit(const PoissonLogLinear& model, std::span<const double> omega,
                       const Priors& priors, const LaplaceOptions& options = {});

/// Laplace fit for the parametric model with each cell's Gamma effect
/// integrated out (negative-binomial cell likelihoods).
LaplaceFit laplace_fit_marginal(const PoissonLogLinear& model, const Priors& priors,
                                const LaplaceOptions& options = {});

// ---------------------------------------------------------------------------
// Iterative proportional fitting

struct IpfOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 1000;
  std::uint64_t dense_threshold = kDefaultDenseThreshold;
};

struct IpfResult {
  std::vector<CellId> cells;   ///< active cells, ascending
  std::vector<double> fitted;  ///< fitted sample means, aligned with cells
  std::size_t iterations = 0;  ///< full cycles performed
  double max_margin_error = 0.0;
  bool converged = false;
};

/// Fits the sample-count table to the margins implied by the design (one-way
/// for I, two-way for II, grand total for O) over the non-structural cells.
IpfResult ipf_fit(const ContingencyTable& table, DesignKind kind, const IpfOptions& options = {});

/// Log-linear coefficients reproducing log(fitted) on the given design, with
/// the intercept dropped. Cells with a zero fit are excluded; columns left
/// without support are set to kUnsupportedCoefficient.
std::vector<double> beta_from_fitted(const DesignMatrix& design, const IpfResult& fit);
inline constexpr double kUnsupportedCoefficient = -30.0;

// ---------------------------------------------------------------------------
// Gibbs orchestration

enum class RandomEffects { Parametric, Nonparametric };
enum class EstimationMode { FullBayes, LaplaceBeta, EmpiricalBayes };

std::string_view to_string(RandomEffects effects);
std::string_view to_string(EstimationMode mode);
RandomEffects parse_random_effects(std::string_view s);
EstimationMode parse_estimation_mode(std::string_view s);

struct ChainConfig {
  std::size_t n_chains = 10;
  std::size_t burn_in = 5000;
  std::size_t keep = 10000;
  std::size_t thin = 1;
  double epsilon = 1.0;  ///< initial SMMALA step size
  bool adapt_epsilon = true;
  std::uint64_t seed = 1;
  ScanOrder scan = ScanOrder::Ascending;
  double rhat_threshold = 1.1;
  std::size_t audit_every = 1000;
  std::size_t monitored_uniques = 100;
  std::size_t max_threads = 0;  ///< 0: hardware concurrency
  /// Overrides the per-chain seeds derived from `seed` when non-empty.
  std::vector<std::uint64_t> chain_seeds;

  void validate() const;
  std::uint64_t chain_seed(std::size_t chain) const;
};

struct SamplerSpec {
  RandomEffects effects = RandomEffects::Nonparametric;
  EstimationMode mode = EstimationMode::FullBayes;
};

/// Resumable per-chain snapshot.
struct ChainCheckpoint {
  static constexpr int kFormatVersion = 1;
  std::size_t chain = 0;
  std::size_t iterations_done = 0;
  double epsilon = 1.0;
  ModelState state;
  std::string rng_state;

  std::string to_json() const;
  static ChainCheckpoint from_json(const std::string& text);
};

/// Kept draws of one chain. Traces are stored draw-major.
struct ChainDraws {
  std::vector<double> beta;           ///< num_draws x q
  std::vector<double> lambda;         ///< num_draws x number of sample uniques
  std::vector<std::size_t> clusters;  ///< per draw
  std::vector<double> mass;           ///< per draw (nonparametric only)
  std::size_t accepted = 0;           ///< SMMALA acceptances after burn-in
  std::size_t proposals = 0;
  std::size_t aborted = 0;
  double final_epsilon = 0.0;
  ChainCheckpoint checkpoint;
};

struct PosteriorDraws {
  std::vector<CellId> unique_cells;  ///< sample uniques whose lambda is kept
  std::size_t num_columns = 0;
  std::size_t draws_per_chain = 0;
  std::vector<ChainDraws> chains;

  std::size_t total_draws() const noexcept { return draws_per_chain * chains.size(); }
  /// lambda of unique u at global draw h (chain-major order).
  double lambda(std::size_t h, std::size_t u) const {
    const auto& c = chains[h / draws_per_chain];
    return c.lambda[(h % draws_per_chain) * unique_cells.size() + u];
  }
};

struct Diagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  double max_rhat = 1.0;
  bool converged = true;
};

struct ChainRun {
  PosteriorDraws draws;
  Diagnostics diagnostics;
};

/// Runs the multi-chain Gibbs sampler. fixed_beta is required for empirical
/// Bayes and ignored otherwise. With `resume`, each chain continues from its
/// checkpoint and keeps `keep` further draws without burn-in.
ChainRun run_chains(const ContingencyTable& table, const PoissonLogLinear& model,
                    const Priors& priors, const ChainConfig& config, const SamplerSpec& spec,
                    std::span<const double> fixed_beta = {},
                    std::span<const ChainCheckpoint> resume = {});

/// Potential scale reduction factor from equal-length traces of >= 2 chains.
double gelman_rubin(std::span<const std::vector<double>> chains);

}  // namespace drisk
