#include "drisk/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "drisk/error.hpp"

namespace drisk {

// ---------------------------------------------------------------------------
// SMMALA

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

struct ProposalTerms {
  Eigen::VectorXd mean;
  Eigen::MatrixXd factor;  // lower Cholesky factor of the metric
  double log_posterior;
};

ProposalTerms proposal_terms(const PoissonLogLinear& model, std::span<const double> beta,
                             std::span<const double> omega, const Priors& priors,
                             double epsilon) {
  auto d = grad_fisher_beta(model, beta, omega, priors);
  ProposalTerms t;
  t.factor = cholesky_lower(d.metric);
  const Eigen::MatrixXd& l = t.factor;
  Eigen::VectorXd natural = l.triangularView<Eigen::Lower>().solve(d.gradient);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(natural);
  t.mean = as_vector(beta) + 0.5 * epsilon * epsilon * natural;
  t.log_posterior = d.log_posterior;
  return t;
}

// log N(x | mean, eps^2 M^{-1}) up to terms that cancel in the MH ratio.
double log_proposal_density(const Eigen::VectorXd& x, const ProposalTerms& t, double epsilon) {
  const Eigen::VectorXd r = t.factor.transpose() * (x - t.mean);
  return t.factor.diagonal().array().log().sum() - 0.5 * r.squaredNorm() / (epsilon * epsilon);
}

}  // namespace

StepOutcome smmala_step(const PoissonLogLinear& model, std::vector<double>& beta,
                        std::span<const double> omega, const Priors& priors, double epsilon,
                        Rng& rng) {
  const auto q = beta.size();
  if (q == 0) return StepOutcome::Accepted;
  ProposalTerms here;
  try {
    here = proposal_terms(model, beta, omega, priors, epsilon);
  } catch (const NumericalDegeneracy&) {
    return StepOutcome::Aborted;
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(q));
  for (auto& v : z) v = draw_normal(rng);
  here.factor.triangularView<Eigen::Lower>().transpose().solveInPlace(z);
  const Eigen::VectorXd proposal = here.mean + epsilon * z;
  const double log_u = std::log(draw_uniform(rng));

  std::vector<double> candidate(proposal.data(), proposal.data() + q);
  ProposalTerms there;
  try {
    there = proposal_terms(model, candidate, omega, priors, epsilon);
  } catch (const NumericalDegeneracy&) {
    return StepOutcome::Rejected;
  } catch (const Error&) {
    // Linear predictor overflow at the proposal.
    return StepOutcome::Rejected;
  }
  const double log_ratio = there.log_posterior - here.log_posterior +
                           log_proposal_density(as_vector(beta), there, epsilon) -
                           log_proposal_density(proposal, here, epsilon);
  if (std::isfinite(log_ratio) && log_u < log_ratio) {
    beta = std::move(candidate);
    return StepOutcome::Accepted;
  }
  return StepOutcome::Rejected;
}

StepOutcome smmala_step(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                        double epsilon, Rng& rng) {
  const auto omega = cell_effects(state);
  return smmala_step(model, state.beta, omega, priors, epsilon, rng);
}

// ---------------------------------------------------------------------------
// Laplace approximation

namespace {

struct Evaluation {
  double value;  // log posterior
  Eigen::VectorXd gradient;
};

template <class Objective>
Eigen::VectorXd maximize_lbfgs(Objective&& objective, Eigen::Index q, const LaplaceOptions& opt,
                               std::size_t& iterations, double& gradient_norm) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(q);
  Evaluation cur = objective(x);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y) for -objective
  iterations = 0;
  gradient_norm = q == 0 ? 0.0 : cur.gradient.cwiseAbs().maxCoeff();
  while (gradient_norm >= opt.gradient_tolerance) {
    if (iterations >= opt.max_iterations)
      throw ConvergenceError("mode search did not converge", gradient_norm);
    ++iterations;
    // Two-loop recursion on the minimisation problem; ascent direction d.
    Eigen::VectorXd d = cur.gradient;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, y] = history[k];
      alpha[k] = s.dot(d) / y.dot(s);
      d -= alpha[k] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      d *= s.dot(y) / y.squaredNorm();
    } else {
      d /= std::max(1.0, cur.gradient.norm());
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, y] = history[k];
      const double b = y.dot(d) / y.dot(s);
      d += (alpha[k] - b) * s;
    }
    double slope = cur.gradient.dot(d);
    if (!(slope > 0.0)) {
      history.clear();
      d = cur.gradient / std::max(1.0, cur.gradient.norm());
      slope = cur.gradient.dot(d);
    }

    double step = 1.0;
    Evaluation next{};
    bool moved = false;
    for (int tries = 0; tries < 60; ++tries, step *= 0.5) {
      try {
        next = objective(x + step * d);
      } catch (const Error&) {
        continue;
      }
      if (std::isfinite(next.value) &&
          next.value >= cur.value + 1e-4 * step * slope - 1e-12 * std::abs(cur.value)) {
        moved = true;
        break;
      }
    }
    if (!moved) throw ConvergenceError("mode search line search failed", gradient_norm);
    Eigen::VectorXd s = step * d;
    Eigen::VectorXd y = cur.gradient - next.gradient;  // gradient of -objective
    x += s;
    cur = std::move(next);
    if (s.dot(y) > 1e-14 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (history.size() > opt.history) history.pop_front();
    }
    gradient_norm = cur.gradient.cwiseAbs().maxCoeff();
  }
  return x;
}

LaplaceFit finish_laplace(Eigen::VectorXd mode, const Eigen::MatrixXd& metric,
                          std::size_t iterations, double gradient_norm) {
  LaplaceFit fit;
  fit.mode = std::move(mode);
  fit.iterations = iterations;
  fit.gradient_norm = gradient_norm;
  const auto q = fit.mode.size();
  if (q == 0) return fit;
  const Eigen::MatrixXd l = cholesky_lower(metric);
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(q, q);
  l.triangularView<Eigen::Lower>().solveInPlace(inv);
  fit.covariance = inv.transpose() * inv;
  fit.covariance_factor = cholesky_lower(fit.covariance);
  return fit;
}

}  // namespace

std::vector<double> LaplaceFit::draw(Rng& rng) const {
  const auto q = mode.size();
  Eigen::VectorXd z(q);
  for (auto& v : z) v = draw_normal(rng);
  Eigen::VectorXd x = mode;
  if (q > 0) x += covariance_factor.triangularView<Eigen::Lower>() * z;
  return {x.data(), x.data() + q};
}

LaplaceFit laplace_fit(const PoissonLogLinear& model, std::span<const double> omega,
                       const Priors& priors, const LaplaceOptions& options) {
  const auto q = static_cast<Eigen::Index>(model.num_columns());
  auto objective = [&](const Eigen::VectorXd& beta) {
    const std::span<const double> b(beta.data(), static_cast<std::size_t>(beta.size()));
    auto d = grad_fisher_beta(model, b, omega, priors);
    return Evaluation{d.log_posterior, std::move(d.gradient)};
  };
  std::size_t iterations = 0;
  double gnorm = 0.0;
  Eigen::VectorXd mode = maximize_lbfgs(objective, q, options, iterations, gnorm);
  const std::span<const double> b(mode.data(), static_cast<std::size_t>(q));
  return finish_laplace(mode, grad_fisher_beta(model, b, omega, priors).metric, iterations, gnorm);
}

namespace {

// Negative-binomial log posterior of beta with Gamma(a, b) cell effects
// integrated out; optionally the negative Hessian.
Evaluation marginal_objective(const PoissonLogLinear& model, const Eigen::VectorXd& beta,
                              const Priors& priors, Eigen::MatrixXd* neg_hessian) {
  const auto q = beta.size();
  const std::span<const double> b(beta.data(), static_cast<std::size_t>(q));
  const auto s = model.scaled_predictor(b);
  const auto f = model.counts();
  const double a = priors.base_shape, rate = priors.base_rate;
  Evaluation ev{log_prior_beta(b, priors.beta_variance), Eigen::VectorXd::Zero(q)};
  if (neg_hessian) *neg_hessian = Eigen::MatrixXd::Zero(q, q);
  const auto& design = model.design();
  for (std::size_t i = 0; i < s.size(); ++i) {
    ev.value += marginal_cell_loglik(f[i], s[i], a, rate);
    const double frac = s[i] / (rate + s[i]);
    const double g = f[i] - (a + f[i]) * frac;
    const double h = (a + f[i]) * frac * rate / (rate + s[i]);
    const auto row = design.row(i);
    for (std::size_t x = 0; x < row.size(); ++x) {
      ev.gradient[row[x]] += g;
      if (neg_hessian)
        for (std::size_t y = 0; y <= x; ++y) (*neg_hessian)(row[x], row[y]) += h;
    }
  }
  const double precision = 1.0 / priors.beta_variance;
  ev.gradient -= precision * beta;
  if (neg_hessian) {
    neg_hessian->triangularView<Eigen::StrictlyUpper>() = neg_hessian->transpose();
    neg_hessian->diagonal().array() += precision;
  }
  return ev;
}

}  // namespace

LaplaceFit laplace_fit_marginal(const PoissonLogLinear& model, const Priors& priors,
                                const LaplaceOptions& options) {
  const auto q = static_cast<Eigen::Index>(model.num_columns());
  auto objective = [&](const Eigen::VectorXd& beta) {
    return marginal_objective(model, beta, priors, nullptr);
  };
  std::size_t iterations = 0;
  double gnorm = 0.0;
  Eigen::VectorXd mode = maximize_lbfgs(objective, q, options, iterations, gnorm);
  Eigen::MatrixXd metric;
  marginal_objective(model, mode, priors, &metric);
  return finish_laplace(mode, metric, iterations, gnorm);
}

// ---------------------------------------------------------------------------
// IPF

namespace {

std::vector<std::vector<std::size_t>> margins_for(DesignKind kind, std::size_t nvar) {
  std::vector<std::vector<std::size_t>> out;
  if (kind == DesignKind::OverallMean) {
    out.push_back({});
  } else if (kind == DesignKind::Independence || nvar < 2) {
    for (std::size_t j = 0; j < nvar; ++j) out.push_back({j});
  } else {
    for (std::size_t j = 0; j < nvar; ++j)
      for (std::size_t l = j + 1; l < nvar; ++l) out.push_back({j, l});
  }
  return out;
}

}  // namespace

IpfResult ipf_fit(const ContingencyTable& table, DesignKind kind, const IpfOptions& options) {
  const auto& schema = table.schema();
  const auto nvar = schema.num_variables();
  IpfResult result;
  result.cells = table.active_cells(options.dense_threshold);
  const auto n = result.cells.size();

  std::vector<double> observed(n, 0.0);
  {
    std::size_t r = 0;
    for (const auto& [cell, f] : table.nonzero_counts()) {
      while (result.cells[r] < cell) ++r;
      observed[r] = static_cast<double>(f);
    }
  }

  // Margin-cell index of every active cell, per margin.
  const auto margins = margins_for(kind, nvar);
  std::vector<std::size_t> margin_size(margins.size(), 1);
  std::vector<std::vector<std::uint32_t>> index(margins.size(), std::vector<std::uint32_t>(n));
  std::vector<std::uint32_t> codes(nvar);
  for (std::size_t r = 0; r < n; ++r) {
    schema.decode(result.cells[r], codes);
    for (std::size_t m = 0; m < margins.size(); ++m) {
      std::uint32_t idx = 0;
      for (auto j : margins[m]) idx = idx * schema.variable(j).cardinality + codes[j];
      index[m][r] = idx;
    }
  }
  std::vector<std::vector<double>> target(margins.size());
  for (std::size_t m = 0; m < margins.size(); ++m) {
    for (auto j : margins[m]) margin_size[m] *= schema.variable(j).cardinality;
    target[m].assign(margin_size[m], 0.0);
    for (std::size_t r = 0; r < n; ++r) target[m][index[m][r]] += observed[r];
  }

  result.fitted.assign(n, 1.0);
  std::vector<double> current;
  auto fitted_margin = [&](std::size_t m) {
    current.assign(margin_size[m], 0.0);
    for (std::size_t r = 0; r < n; ++r) current[index[m][r]] += result.fitted[r];
  };

  while (result.iterations < options.max_iterations) {
    ++result.iterations;
    for (std::size_t m = 0; m < margins.size(); ++m) {
      fitted_margin(m);
      for (std::size_t r = 0; r < n; ++r) {
        const double have = current[index[m][r]];
        result.fitted[r] = have > 0.0 ? result.fitted[r] * target[m][index[m][r]] / have : 0.0;
      }
    }
    result.max_margin_error = 0.0;
    for (std::size_t m = 0; m < margins.size(); ++m) {
      fitted_margin(m);
      for (std::size_t c = 0; c < margin_size[m]; ++c)
        result.max_margin_error =
            std::max(result.max_margin_error, std::abs(current[c] - target[m][c]));
    }
    if (result.max_margin_error < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<double> beta_from_fitted(const DesignMatrix& design, const IpfResult& fit) {
  const auto q = static_cast<Eigen::Index>(design.num_columns());
  if (q == 0) return {};
  // Normal equations for [1 W] theta = log(fitted) over cells with a positive fit.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q + 1, q + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q + 1);
  std::vector<std::uint32_t> cols;
  for (std::size_t r = 0; r < fit.cells.size(); ++r) {
    if (!(fit.fitted[r] > 0.0)) continue;
    const auto row = design.row_of(fit.cells[r]);
    if (row == design.num_rows()) throw InputError("fitted cell missing from the design");
    const double y = std::log(fit.fitted[r]);
    cols.assign({0});
    for (auto c : design.row(row)) cols.push_back(c + 1);
    for (auto a : cols) {
      rhs[a] += y;
      for (auto b : cols) gram(a, b) += 1.0;
    }
  }
  std::vector<bool> supported(static_cast<std::size_t>(q), true);
  for (Eigen::Index j = 1; j <= q; ++j)
    if (gram(j, j) == 0.0) {
      supported[static_cast<std::size_t>(j - 1)] = false;
      gram(j, j) = 1.0;
    }
  const Eigen::VectorXd theta = gram.ldlt().solve(rhs);
  std::vector<double> beta(static_cast<std::size_t>(q));
  for (Eigen::Index j = 0; j < q; ++j)
    beta[static_cast<std::size_t>(j)] =
        supported[static_cast<std::size_t>(j)] ? theta[j + 1] : kUnsupportedCoefficient;
  return beta;
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(RandomEffects effects) {
  return effects == RandomEffects::Parametric ? "P" : "NP";
}

std::string_view to_string(EstimationMode mode) {
  switch (mode) {
    case EstimationMode::FullBayes: return "full-bayes";
    case EstimationMode::LaplaceBeta: return "laplace-beta";
    case EstimationMode::EmpiricalBayes: return "empirical-bayes";
  }
  return "?";
}

RandomEffects parse_random_effects(std::string_view s) {
  if (s == "P") return RandomEffects::Parametric;
  if (s == "NP") return RandomEffects::Nonparametric;
  throw InputError("unknown random effects '" + std::string(s) + "' (expected P or NP)");
}

EstimationMode parse_estimation_mode(std::string_view s) {
  if (s == "full-bayes") return EstimationMode::FullBayes;
  if (s == "laplace-beta") return EstimationMode::LaplaceBeta;
  if (s == "empirical-bayes") return EstimationMode::EmpiricalBayes;
  throw InputError("unknown estimation mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Chains

void ChainConfig::validate() const {
  if (n_chains == 0) throw InputError("n_chains must be positive");
  if (keep == 0) throw InputError("keep must be positive");
  if (thin == 0) throw InputError("thin must be positive");
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(rhat_threshold > 1.0)) throw InputError("rhat_threshold must exceed 1");
  if (!chain_seeds.empty() && chain_seeds.size() != n_chains)
    throw InputError("chain_seeds must list one seed per chain");
}

std::uint64_t ChainConfig::chain_seed(std::size_t chain) const {
  if (!chain_seeds.empty()) return chain_seeds.at(chain);
  return derive_seed(seed, chain + 1);
}

namespace {

constexpr std::size_t kAdaptWindow = 50;

struct ChainContext {
  const PoissonLogLinear& model;
  const Priors& priors;
  const ChainConfig& config;
  const SamplerSpec& spec;
  std::span<const double> fixed_beta;
  const LaplaceFit* laplace;
  std::span<const std::size_t> unique_rows;
};

void redraw_parametric(const PoissonLogLinear& model, std::span<const double> s, ModelState& state,
                       const Priors& priors, Rng& rng) {
  const auto f = model.counts();
  for (std::size_t i = 0; i < s.size(); ++i)
    state.cluster_effects[i] = std::max(
        draw_gamma(rng, priors.base_shape + f[i], priors.base_rate + s[i]),
        std::numeric_limits<double>::min());
}

ModelState initial_state(const ChainContext& ctx, Rng& rng) {
  const auto& model = ctx.model;
  const auto n = model.num_rows();
  const auto q = model.num_columns();
  std::vector<double> beta(q, 0.0);
  switch (ctx.spec.mode) {
    case EstimationMode::FullBayes:
      for (auto& b : beta) b = 0.5 * draw_normal(rng);
      break;
    case EstimationMode::LaplaceBeta:
      beta = ctx.laplace->draw(rng);
      break;
    case EstimationMode::EmpiricalBayes:
      beta.assign(ctx.fixed_beta.begin(), ctx.fixed_beta.end());
      break;
  }
  const auto s = model.scaled_predictor(beta);
  ModelState state;
  if (ctx.spec.effects == RandomEffects::Parametric) {
    state = ModelState::singletons(std::move(beta), std::vector<double>(n, 1.0));
    redraw_parametric(model, s, state, ctx.priors, rng);
    return state;
  }
  state.beta = std::move(beta);
  state.mass = std::max(draw_gamma(rng, ctx.priors.mass_shape, ctx.priors.mass_rate), 1e-3);
  const std::size_t start_clusters =
      1 + static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(std::min<std::size_t>(n, 20)));
  state.allocation.resize(n);
  for (auto& a : state.allocation)
    a = static_cast<std::uint32_t>(
        std::min<std::size_t>(start_clusters - 1,
                              static_cast<std::size_t>(draw_uniform(rng) *
                                                       static_cast<double>(start_clusters))));
  // Compact labels.
  std::vector<std::uint32_t> relabel(start_clusters, std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (auto& a : state.allocation) {
    if (relabel[a] == std::numeric_limits<std::uint32_t>::max()) relabel[a] = next++;
    a = relabel[a];
  }
  state.cluster_effects.assign(next, 1.0);
  if (n > 0) redraw_cluster_effects(model.counts(), s, state, ctx.priors, rng);
  return state;
}

ChainDraws run_one_chain(const ChainContext& ctx, std::size_t chain,
                         const ChainCheckpoint* resume) {
  const auto& model = ctx.model;
  const auto& cfg = ctx.config;
  const auto q = model.num_columns();
  const auto n = model.num_rows();
  const double pi = model.sampling_fraction();
  const bool nonparametric = ctx.spec.effects == RandomEffects::Nonparametric;

  Rng rng;
  ModelState state;
  double epsilon = cfg.epsilon;
  std::size_t done = 0;
  std::size_t burn_in = cfg.burn_in;
  if (resume) {
    std::istringstream(resume->rng_state) >> rng;
    state = resume->state;
    state.validate(n, q);
    epsilon = resume->epsilon;
    done = resume->iterations_done;
    burn_in = 0;
  } else {
    rng.seed(cfg.chain_seed(chain));
    state = initial_state(ctx, rng);
  }

  ChainDraws out;
  const auto nu = ctx.unique_rows.size();
  out.beta.reserve(cfg.keep * q);
  out.lambda.reserve(cfg.keep * nu);
  std::vector<double> s(n), omega(n);
  std::size_t window_accepts = 0;
  const std::size_t total = burn_in + cfg.keep * cfg.thin;

  for (std::size_t it = 0; it < total; ++it) {
    const bool burning = it < burn_in;
    try {
      // Fixed effects.
      if (q > 0) {
        if (ctx.spec.mode == EstimationMode::FullBayes) {
          for (std::size_t i = 0; i < n; ++i) omega[i] = state.effect_of(i);
          const auto outcome = smmala_step(model, state.beta, omega, ctx.priors, epsilon, rng);
          const bool accepted = outcome == StepOutcome::Accepted;
          if (burning) {
            window_accepts += accepted;
            if (cfg.adapt_epsilon && (it + 1) % kAdaptWindow == 0) {
              const double rate = static_cast<double>(window_accepts) / kAdaptWindow;
              if (rate < 0.5) epsilon *= 0.8;
              else if (rate > 0.7) epsilon *= 1.25;
              window_accepts = 0;
            }
          } else {
            ++out.proposals;
            out.accepted += accepted;
            out.aborted += outcome == StepOutcome::Aborted;
          }
        } else if (ctx.spec.mode == EstimationMode::LaplaceBeta) {
          state.beta = ctx.laplace->draw(rng);
        }
      }
      model.scaled_predictor(state.beta, s);

      // Random effects and mass.
      if (nonparametric) {
        ReallocationOptions opts;
        opts.scan = cfg.scan;
        opts.audit = cfg.audit_every > 0 && (done + it + 1) % cfg.audit_every == 0;
        gibbs_reallocate(model.counts(), s, state, ctx.priors, rng, opts);
        redraw_cluster_effects(model.counts(), s, state, ctx.priors, rng);
        state.mass = sample_mass(state.num_clusters(), n, state.mass, ctx.priors, rng);
      } else {
        redraw_parametric(model, s, state, ctx.priors, rng);
      }
    } catch (const std::exception& e) {
      throw Error("chain " + std::to_string(chain) + ", iteration " + std::to_string(done + it + 1) +
                  ": " + e.what());
    }

    if (!burning && (it - burn_in + 1) % cfg.thin == 0) {
      out.beta.insert(out.beta.end(), state.beta.begin(), state.beta.end());
      for (auto r : ctx.unique_rows) out.lambda.push_back(s[r] / pi * state.effect_of(r));
      if (nonparametric) {
        out.clusters.push_back(state.num_clusters());
        out.mass.push_back(state.mass);
      }
    }
  }

  out.final_epsilon = epsilon;
  out.checkpoint.chain = chain;
  out.checkpoint.iterations_done = done + total;
  out.checkpoint.epsilon = epsilon;
  out.checkpoint.state = std::move(state);
  std::ostringstream rs;
  rs << rng;
  out.checkpoint.rng_state = rs.str();
  return out;
}

Diagnostics diagnose(const PosteriorDraws& draws, const PoissonLogLinear& model,
                     const ChainConfig& cfg, bool nonparametric) {
  Diagnostics d;
  const auto m = draws.chains.size();
  const auto h = draws.draws_per_chain;
  if (m < 2 || h < 10) {
    d.converged = false;
    return d;
  }
  std::vector<std::vector<double>> traces(m);
  auto add = [&](std::string name, auto&& value_at) {
    for (std::size_t c = 0; c < m; ++c) {
      traces[c].resize(h);
      for (std::size_t t = 0; t < h; ++t) traces[c][t] = value_at(draws.chains[c], t);
    }
    d.names.push_back(std::move(name));
    d.rhat.push_back(gelman_rubin(traces));
  };
  const auto q = draws.num_columns;
  const auto& spec = model.design().spec();
  for (std::size_t j = 0; j < q; ++j)
    add("beta[" + spec.column_label(j) + "]",
        [&](const ChainDraws& c, std::size_t t) { return c.beta[t * q + j]; });
  if (nonparametric) {
    add("log_mass", [](const ChainDraws& c, std::size_t t) { return std::log(c.mass[t]); });
    add("clusters",
        [](const ChainDraws& c, std::size_t t) { return static_cast<double>(c.clusters[t]); });
  }
  // Monitored subset of sample uniques.
  const auto nu = draws.unique_cells.size();
  std::vector<std::size_t> picks(nu);
  std::iota(picks.begin(), picks.end(), 0);
  if (nu > cfg.monitored_uniques) {
    Rng pick_rng(derive_seed(cfg.seed, 0x6d6f6e69746f72ULL));
    std::shuffle(picks.begin(), picks.end(), pick_rng);
    picks.resize(cfg.monitored_uniques);
    std::sort(picks.begin(), picks.end());
  }
  for (auto u : picks)
    add("log_lambda[" + std::to_string(draws.unique_cells[u]) + "]",
        [&](const ChainDraws& c, std::size_t t) { return std::log(c.lambda[t * nu + u]); });

  d.max_rhat = 1.0;
  for (double r : d.rhat) d.max_rhat = std::max(d.max_rhat, std::isnan(r) ? INFINITY : r);
  d.converged = d.max_rhat < cfg.rhat_threshold;
  return d;
}

}  // namespace

ChainRun run_chains(const ContingencyTable& table, const PoissonLogLinear& model,
                    const Priors& priors, const ChainConfig& config, const SamplerSpec& spec,
                    std::span<const double> fixed_beta, std::span<const ChainCheckpoint> resume) {
  priors.validate();
  config.validate();
  const auto q = model.num_columns();
  if (spec.mode == EstimationMode::EmpiricalBayes) {
    if (spec.effects != RandomEffects::Nonparametric)
      throw InputError("empirical Bayes requires nonparametric random effects");
    if (fixed_beta.size() != q) throw InputError("empirical Bayes needs a fixed beta of length q");
  }
  if (spec.mode == EstimationMode::LaplaceBeta && spec.effects != RandomEffects::Parametric)
    throw InputError("the Laplace approximation for beta is available for parametric effects only");
  if (!resume.empty() && resume.size() != config.n_chains)
    throw InputError("resume needs one checkpoint per chain");

  std::optional<LaplaceFit> laplace;
  if (spec.mode == EstimationMode::LaplaceBeta) laplace = laplace_fit_marginal(model, priors);

  ChainRun run;
  auto& draws = run.draws;
  draws.unique_cells = sample_uniques(table);
  draws.num_columns = q;
  draws.draws_per_chain = config.keep;
  std::vector<std::size_t> unique_rows;
  for (auto cell : draws.unique_cells) {
    const auto r = model.design().row_of(cell);
    if (r == model.num_rows()) throw InputError("sample unique outside the design");
    unique_rows.push_back(r);
  }

  const ChainContext ctx{model, priors, config, spec, fixed_beta,
                         laplace ? &*laplace : nullptr, unique_rows};
  draws.chains.resize(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next++) < config.n_chains;) {
      try {
        draws.chains[c] = run_one_chain(ctx, c, resume.empty() ? nullptr : &resume[c]);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  std::size_t threads = config.max_threads ? config.max_threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, config.n_chains);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  run.diagnostics = diagnose(draws, model, config, spec.effects == RandomEffects::Nonparametric);
  return run;
}

double gelman_rubin(std::span<const std::vector<double>> chains) {
  const auto m = chains.size();
  if (m < 2) throw InputError("gelman_rubin needs at least two chains");
  const auto n = chains[0].size();
  if (n < 10) throw InputError("gelman_rubin needs traces of length >= 10");
  for (const auto& c : chains)
    if (c.size() != n) throw InputError("gelman_rubin traces differ in length");
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  std::vector<double> means(m);
  double within = 0.0, grand = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / dn;
    double ss = 0.0;
    for (double v : chains[c]) ss += (v - means[c]) * (v - means[c]);
    within += ss / (dn - 1.0);
    grand += means[c];
  }
  within /= dm;
  grand /= dm;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= dn / (dm - 1.0);
  if (within <= 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  // Chains that agree exactly are converged by definition; the plain ratio
  // would dip below 1 by the (n-1)/n factor.
  if (std::all_of(means.begin(), means.end(), [&](double mu) { return mu == means[0]; }))
    return 1.0;
  const double pooled = (dn - 1.0) / dn * within + between / dn;
  return std::sqrt(pooled / within);
}

}  // namespace drisk
