#include "drisk/oracle.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "drisk/dp_effects.hpp"
#include "drisk/error.hpp"

namespace drisk::oracle {

std::uint64_t bell_number(std::size_t k) {
  // Bell triangle.
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 1; i <= k; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

std::vector<Partition> enumerate_partitions(std::size_t k) {
  if (k > kMaxEnumerable)
    throw InputError("refusing to enumerate partitions of " + std::to_string(k) + " elements");
  std::vector<Partition> out;
  if (k == 0) {
    out.emplace_back();
    return out;
  }
  Partition p(k, 0);
  std::vector<std::uint32_t> prefix_max(k, 0);  // max label among p[0..i-1]
  while (true) {
    out.push_back(p);
    // Find the rightmost position that can be incremented.
    std::size_t i = k;
    while (--i > 0) {
      if (p[i] <= prefix_max[i]) break;
    }
    if (i == 0) break;
    ++p[i];
    for (std::size_t j = i + 1; j < k; ++j) {
      prefix_max[j] = std::max(prefix_max[j - 1], p[j - 1]);
      p[j] = 0;
    }
  }
  return out;
}

std::vector<std::size_t> block_sizes(const Partition& p) {
  std::vector<std::size_t> sizes;
  for (auto b : p) {
    if (b >= sizes.size()) sizes.resize(b + 1, 0);
    ++sizes[b];
  }
  return sizes;
}

double partition_log_weight(const Partition& p, std::span<const double> f,
                            std::span<const double> s, double mass, double shape, double rate) {
  const auto sizes = block_sizes(p);
  double out = partition_log_prior(sizes, mass);
  std::vector<double> bf, bs;
  for (std::uint32_t b = 0; b < sizes.size(); ++b) {
    bf.clear();
    bs.clear();
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] == b) {
        bf.push_back(f[i]);
        bs.push_back(s[i]);
      }
    out += cluster_joint_loglik(bf, bs, shape, rate);
  }
  return out;
}

double partition_log_weight_sequential(const Partition& p, std::span<const double> f,
                                       std::span<const double> s, double mass, double shape,
                                       double rate) {
  std::vector<std::size_t> n;
  std::vector<double> sum_f, sum_s;
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto b = p[i];
    const double denom = std::log(mass + static_cast<double>(i));
    if (b == n.size()) {
      out += std::log(mass) - denom + marginal_cell_loglik(f[i], s[i], shape, rate);
      n.push_back(0);
      sum_f.push_back(0.0);
      sum_s.push_back(0.0);
    } else {
      out += std::log(static_cast<double>(n[b])) - denom +
             conditional_cell_loglik(f[i], s[i], sum_f[b], sum_s[b], shape, rate);
    }
    ++n[b];
    sum_f[b] += f[i];
    sum_s[b] += s[i];
  }
  return out;
}

PartitionPosterior exact_partition_posterior(std::span<const double> f, std::span<const double> s,
                                             double mass, double shape, double rate) {
  if (f.size() != s.size()) throw InputError("counts and predictors differ in length");
  if (f.size() > 8) throw InputError("exact partition posterior limited to 8 cells");
  PartitionPosterior post;
  post.partitions = enumerate_partitions(f.size());
  post.probability.resize(post.partitions.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < post.partitions.size(); ++i) {
    post.probability[i] = partition_log_weight(post.partitions[i], f, s, mass, shape, rate);
    top = std::max(top, post.probability[i]);
  }
  double total = 0.0;
  for (auto& w : post.probability) {
    w = std::exp(w - top);
    total += w;
  }
  for (auto& w : post.probability) w /= total;
  return post;
}

double quadrature(const std::function<double(double)>& fn, double lo, double hi, double tol) {
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      fn, lo, hi, 20, tol, &error);
  if (!std::isfinite(value) || error > tol * std::max(1.0, std::abs(value)))
    throw ConvergenceError("quadrature did not reach the requested tolerance", error);
  return value;
}

McEstimate mc_reference(std::size_t n, Rng& rng, const std::function<double(Rng&)>& statistic) {
  if (n < 2) throw InputError("mc_reference needs at least two draws");
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = statistic(rng);
    const double delta = x - mean;
    mean += delta / static_cast<double>(i);
    m2 += delta * (x - mean);
  }
  const double var = m2 / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double mass_log_posterior(double mass, std::size_t clusters, std::size_t cells, double shape,
                          double rate) {
  const double c = static_cast<double>(clusters), k = static_cast<double>(cells);
  return (shape - 1.0) * std::log(mass) - rate * mass + c * std::log(mass) + std::lgamma(mass) -
         std::lgamma(mass + k);
}

}  // namespace drisk::oracle
