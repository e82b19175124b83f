#include "drisk/dp_effects.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drisk/error.hpp"

namespace drisk {

namespace detail {

double predictive_kernel(double f, double s, double shape, double rate) {
  const double b_new = rate + s;
  double out = shape * std::log(rate / b_new);
  if (f == 0.0) return out;
  out -= f * std::log(b_new);
  if (f <= 8.0) {
    // lgamma(shape + f) - lgamma(shape) for integer f.
    double prod = 1.0;
    for (double t = 0.0; t < f; t += 1.0) prod *= shape + t;
    out += std::log(prod);
  } else {
    out += std::lgamma(shape + f) - std::lgamma(shape);
  }
  return out;
}

}  // namespace detail

double marginal_cell_loglik(double f, double s, double shape, double rate) {
  double out = shape * std::log(rate) + std::lgamma(shape + f) - std::lgamma(shape) -
               std::lgamma(f + 1.0) - (shape + f) * std::log(rate + s);
  if (f > 0.0) out += f * std::log(s);
  return out;
}

double conditional_cell_loglik(double f, double s, double sum_f, double sum_xi, double shape,
                               double rate) {
  return marginal_cell_loglik(f, s, shape + sum_f, rate + sum_xi);
}

double cluster_joint_loglik(std::span<const double> f, std::span<const double> s, double shape,
                            double rate) {
  double total_f = 0.0, total_s = 0.0, out = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    total_f += f[i];
    total_s += s[i];
    out -= std::lgamma(f[i] + 1.0);
    if (f[i] > 0.0) out += f[i] * std::log(s[i]);
  }
  return out + shape * std::log(rate) - std::lgamma(shape) + std::lgamma(shape + total_f) -
         (shape + total_f) * std::log(rate + total_s);
}

double partition_log_prior(std::span<const std::size_t> sizes, double mass) {
  std::size_t k = 0;
  double out = 0.0;
  for (auto n : sizes) {
    if (n == 0) throw InputError("partition has an empty block");
    k += n;
    out += std::lgamma(static_cast<double>(n));
  }
  const double c = static_cast<double>(sizes.size());
  return out + std::lgamma(mass) - std::lgamma(mass + static_cast<double>(k)) + c * std::log(mass);
}

ClusterStats ClusterStats::compute(std::span<const double> f, std::span<const double> s,
                                   std::span<const std::uint32_t> allocation,
                                   std::size_t num_clusters) {
  ClusterStats st;
  st.size.assign(num_clusters, 0);
  st.sum_f.assign(num_clusters, 0.0);
  st.sum_xi.assign(num_clusters, 0.0);
  for (std::size_t i = 0; i < allocation.size(); ++i) {
    const auto j = allocation[i];
    ++st.size[j];
    st.sum_f[j] += f[i];
    st.sum_xi[j] += s[i];
  }
  return st;
}

bool ClusterStats::matches(const ClusterStats& other, double rel_tol) const {
  if (size != other.size || sum_f != other.sum_f) return false;
  for (std::size_t j = 0; j < sum_xi.size(); ++j) {
    const double scale = std::max(std::abs(sum_xi[j]), std::abs(other.sum_xi[j]));
    if (std::abs(sum_xi[j] - other.sum_xi[j]) > rel_tol * scale) return false;
  }
  return true;
}

void gibbs_reallocate(std::span<const double> f, std::span<const double> s, ModelState& state,
                      const Priors& priors, Rng& rng, const ReallocationOptions& options) {
  const std::size_t n = state.allocation.size();
  if (n == 0) return;
  const double a = priors.base_shape, b = priors.base_rate;
  const double log_mass = std::log(state.mass);

  // Cluster slots; freed slots are reused. `live` lists occupied slots and
  // `live_pos` gives each slot's position in it.
  auto stats = ClusterStats::compute(f, s, state.allocation, state.num_clusters());
  std::vector<double> effect = state.cluster_effects;
  std::vector<std::uint32_t> live(stats.size.size());
  std::iota(live.begin(), live.end(), 0u);
  std::vector<std::uint32_t> live_pos = live;
  std::vector<std::uint32_t> free_slots;
  std::vector<std::uint8_t> fresh(stats.size.size(), 0);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  if (options.scan == ScanOrder::RandomPermutation) std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> weight;
  weight.reserve(live.size() + 16);
  auto& alloc = state.allocation;

  for (auto i : order) {
    const double fi = f[i], si = s[i];
    const auto old = alloc[i];
    --stats.size[old];
    stats.sum_f[old] -= fi;
    stats.sum_xi[old] -= si;
    if (stats.size[old] == 0) {
      stats.sum_f[old] = 0.0;
      stats.sum_xi[old] = 0.0;
      const auto pos = live_pos[old];
      live[pos] = live.back();
      live_pos[live[pos]] = pos;
      live.pop_back();
      free_slots.push_back(old);
    }

    weight.resize(live.size() + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < live.size(); ++c) {
      const auto j = live[c];
      const double w = std::log(static_cast<double>(stats.size[j])) +
                       detail::predictive_kernel(fi, si, a + stats.sum_f[j], b + stats.sum_xi[j]);
      weight[c] = w;
      top = std::max(top, w);
    }
    weight.back() = log_mass + detail::predictive_kernel(fi, si, a, b);
    top = std::max(top, weight.back());

    double total = 0.0;
    for (auto& w : weight) {
      w = std::exp(w - top);
      total += w;
    }
    double u = draw_uniform(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < weight.size(); ++pick) {
      u -= weight[pick];
      if (u < 0.0) break;
    }

    std::uint32_t target;
    if (pick < live.size()) {
      target = live[pick];
    } else {
      if (!free_slots.empty()) {
        target = free_slots.back();
        free_slots.pop_back();
      } else {
        target = static_cast<std::uint32_t>(stats.size.size());
        stats.size.push_back(0);
        stats.sum_f.push_back(0.0);
        stats.sum_xi.push_back(0.0);
        effect.push_back(0.0);
        live_pos.push_back(0);
        fresh.push_back(0);
      }
      fresh[target] = 1;
      live_pos[target] = static_cast<std::uint32_t>(live.size());
      live.push_back(target);
    }
    ++stats.size[target];
    stats.sum_f[target] += fi;
    stats.sum_xi[target] += si;
    alloc[i] = target;
  }

  if (options.audit) {
    const auto recomputed = ClusterStats::compute(f, s, alloc, stats.size.size());
    if (!recomputed.matches(stats))
      throw Error("cluster statistics drifted from their recomputation");
  }

  // Recompact labels in order of first appearance.
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> relabel(stats.size.size(), kUnset);
  std::vector<double> effects;
  effects.reserve(live.size());
  for (auto& label : alloc) {
    if (relabel[label] == kUnset) {
      relabel[label] = static_cast<std::uint32_t>(effects.size());
      effects.push_back(fresh[label] ? (a + stats.sum_f[label]) / (b + stats.sum_xi[label])
                                     : effect[label]);
    }
    label = relabel[label];
  }
  state.cluster_effects = std::move(effects);
}

void gibbs_reallocate(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                      Rng& rng, const ReallocationOptions& options) {
  const auto s = model.scaled_predictor(state.beta);
  gibbs_reallocate(model.counts(), s, state, priors, rng, options);
}

void redraw_cluster_effects(std::span<const double> f, std::span<const double> s,
                            ModelState& state, const Priors& priors, Rng& rng) {
  const auto st = ClusterStats::compute(f, s, state.allocation, state.num_clusters());
  for (std::size_t j = 0; j < state.cluster_effects.size(); ++j) {
    double w = draw_gamma(rng, priors.base_shape + st.sum_f[j], priors.base_rate + st.sum_xi[j]);
    // Guard against a denormal underflow to exactly zero.
    state.cluster_effects[j] = std::max(w, std::numeric_limits<double>::min());
  }
}

void redraw_cluster_effects(const PoissonLogLinear& model, ModelState& state, const Priors& priors,
                            Rng& rng) {
  const auto s = model.scaled_predictor(state.beta);
  redraw_cluster_effects(model.counts(), s, state, priors, rng);
}

double sample_mass(std::size_t num_clusters, std::size_t num_cells, double previous_mass,
                   const Priors& priors, Rng& rng) {
  const double shape = priors.mass_shape, rate = priors.mass_rate;
  if (num_cells == 0) return draw_gamma(rng, shape, rate);
  if (num_clusters == 0) throw InputError("sample_mass needs at least one cluster");
  const double c = static_cast<double>(num_clusters);
  const double k = static_cast<double>(num_cells);
  const double eta = draw_beta(rng, previous_mass + 1.0, k);
  const double post_rate = rate - std::log(eta);
  const double odds = (shape + c - 1.0) / (k * post_rate);
  const double p_upper = odds / (1.0 + odds);
  const double post_shape = draw_uniform(rng) < p_upper ? shape + c : shape + c - 1.0;
  const double m = draw_gamma(rng, post_shape, post_rate);
  return std::max(m, std::numeric_limits<double>::min());
}

}  // namespace drisk
