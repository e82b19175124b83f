#include "drisk/model.hpp"

#include <cmath>
#include <numbers>

#include "drisk/error.hpp"

namespace drisk {

void Priors::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InputError(std::string("prior parameter ") + name + " must be positive");
  };
  check(beta_variance, "beta_variance");
  check(base_shape, "base_shape");
  check(base_rate, "base_rate");
  check(mass_shape, "mass_shape");
  check(mass_rate, "mass_rate");
}

void ModelState::validate(std::size_t num_rows, std::size_t num_columns) const {
  if (beta.size() != num_columns) throw Error("state: beta has wrong length");
  if (allocation.size() != num_rows) throw Error("state: allocation has wrong length");
  if (!(mass > 0.0)) throw Error("state: mass must be positive");
  std::vector<std::size_t> sizes(cluster_effects.size(), 0);
  for (auto a : allocation) {
    if (a >= sizes.size()) throw Error("state: allocation label out of range");
    ++sizes[a];
  }
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) throw Error("state: cluster " + std::to_string(j) + " is empty");
    if (!(cluster_effects[j] > 0.0) || !std::isfinite(cluster_effects[j]))
      throw Error("state: cluster effect must be positive and finite");
  }
}

ModelState ModelState::singletons(std::vector<double> beta, std::vector<double> effects) {
  ModelState s;
  s.beta = std::move(beta);
  s.allocation.resize(effects.size());
  for (std::size_t i = 0; i < effects.size(); ++i) s.allocation[i] = static_cast<std::uint32_t>(i);
  s.cluster_effects = std::move(effects);
  return s;
}

PoissonLogLinear::PoissonLogLinear(const ContingencyTable& table, DesignMatrix design)
    : design_(std::move(design)), pi_(table.sampling_fraction()) {
  const auto n = design_.num_rows();
  counts_.assign(n, 0.0);
  log_factorials_.assign(n, 0.0);
  for (const auto& [cell, f] : table.nonzero_counts()) {
    const auto row = design_.row_of(cell);
    if (row == n) throw InputError("cell " + std::to_string(cell) + " has a count but no design row");
    counts_[row] = static_cast<double>(f);
    log_factorials_[row] = std::lgamma(static_cast<double>(f) + 1.0);
  }
}

void PoissonLogLinear::scaled_predictor(std::span<const double> beta, std::span<double> out) const {
  linear_predictor(design_, beta, out);
  for (auto& v : out) v *= pi_;
}

std::vector<double> PoissonLogLinear::scaled_predictor(std::span<const double> beta) const {
  std::vector<double> out(num_rows());
  scaled_predictor(beta, out);
  return out;
}

double PoissonLogLinear::log_likelihood(std::span<const double> beta,
                                        std::span<const double> omega) const {
  const auto s = scaled_predictor(beta);
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double mu = s[i] * omega[i];
    total += -mu - log_factorials_[i];
    if (counts_[i] > 0.0) total += counts_[i] * std::log(mu);
  }
  return total;
}

std::vector<double> cell_effects(const ModelState& state) {
  std::vector<double> out(state.allocation.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = state.effect_of(i);
  return out;
}

double log_likelihood(const PoissonLogLinear& model, const ModelState& state) {
  return model.log_likelihood(state.beta, cell_effects(state));
}

double log_prior_beta(std::span<const double> beta, double variance) {
  double ss = 0.0;
  for (double b : beta) ss += b * b;
  const double n = static_cast<double>(beta.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * variance) - 0.5 * ss / variance;
}

double log_base_measure(double phi, double shape, double rate) {
  // Gamma density on omega = e^phi times the Jacobian e^phi.
  return shape * std::log(rate) - std::lgamma(shape) + shape * phi - rate * std::exp(phi);
}

double log_posterior_beta(const PoissonLogLinear& model, std::span<const double> beta,
                          std::span<const double> omega, const Priors& priors) {
  return model.log_likelihood(beta, omega) + log_prior_beta(beta, priors.beta_variance);
}

BetaDerivatives grad_fisher_beta(const PoissonLogLinear& model, std::span<const double> beta,
                                 std::span<const double> omega, const Priors& priors) {
  const auto q = model.num_columns();
  BetaDerivatives out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q)),
                      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q),
                                            static_cast<Eigen::Index>(q)),
                      log_prior_beta(beta, priors.beta_variance)};
  const auto s = model.scaled_predictor(beta);
  const auto f = model.counts();
  const auto lf = model.log_factorials();
  const auto& design = model.design();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double mu = s[i] * omega[i];
    out.log_posterior += -mu - lf[i];
    if (f[i] > 0.0) out.log_posterior += f[i] * std::log(mu);
    const double resid = f[i] - mu;
    const auto row = design.row(i);
    for (std::size_t a = 0; a < row.size(); ++a) {
      out.gradient[row[a]] += resid;
      for (std::size_t b = 0; b <= a; ++b) out.metric(row[a], row[b]) += mu;
    }
  }
  if (q == 0) return out;
  // Rows are ascending, so only the lower triangle was filled.
  out.metric.triangularView<Eigen::StrictlyUpper>() = out.metric.transpose();
  const double precision = 1.0 / priors.beta_variance;
  for (std::size_t j = 0; j < q; ++j) {
    out.gradient[static_cast<Eigen::Index>(j)] -= beta[j] * precision;
    out.metric(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += precision;
  }
  return out;
}

BetaDerivatives grad_fisher_beta(const PoissonLogLinear& model, const ModelState& state,
                                 const Priors& priors) {
  return grad_fisher_beta(model, state.beta, cell_effects(state), priors);
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
  const auto n = m.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalDegeneracy("metric is not positive definite", static_cast<std::size_t>(j));
    d = std::sqrt(d);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
  }
  return l;
}

}  // namespace drisk
