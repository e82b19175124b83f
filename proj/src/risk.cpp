#include "drisk/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drisk/error.hpp"

namespace drisk {

CellRisk cell_risk_closed_form(double lambda, double pi) {
  const double x = (1.0 - pi) * std::max(lambda, 0.0);
  if (x < kSeriesThreshold) return {1.0 - x, 1.0 - 0.5 * x};
  return {std::exp(-x), -std::expm1(-x) / x};
}

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("percentile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InputError("summary of an empty sample");
  Summary s;
  const double n = static_cast<double>(values.size());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  // A constant sample has zero spread; the rounded mean would suggest otherwise.
  if (*lo == *hi) s.mean = *lo;
  else if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < kReportedPercentiles.size(); ++i)
    s.percentiles[i] = nearest_rank(sorted, kReportedPercentiles[i]);
  return s;
}

StarEstimates global_star_estimates(const PosteriorDraws& draws, double pi) {
  const auto h_total = draws.total_draws();
  if (h_total == 0) throw InputError("no posterior draws");
  const auto nu = draws.unique_cells.size();
  StarEstimates out;
  out.cells = draws.unique_cells;
  out.cell_tau1.assign(nu, 0.0);
  out.cell_tau2.assign(nu, 0.0);
  out.tau1_draws.resize(h_total);
  out.tau2_draws.resize(h_total);
  for (std::size_t h = 0; h < h_total; ++h) {
    double t1 = 0.0, t2 = 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
      const auto r = cell_risk_closed_form(draws.lambda(h, u), pi);
      t1 += r.tau1;
      t2 += r.tau2;
      out.cell_tau1[u] += r.tau1;
      out.cell_tau2[u] += r.tau2;
    }
    out.tau1_draws[h] = t1;
    out.tau2_draws[h] = t2;
  }
  for (std::size_t u = 0; u < nu; ++u) {
    out.cell_tau1[u] /= static_cast<double>(h_total);
    out.cell_tau2[u] /= static_cast<double>(h_total);
  }
  out.tau1 = summarize(out.tau1_draws);
  out.tau2 = summarize(out.tau2_draws);
  return out;
}

Count sample_population_count(double lambda, Count f, double pi, Rng& rng) {
  return f + draw_poisson(rng, (1.0 - pi) * std::max(lambda, 0.0));
}

GlobalEstimates global_full_bayes(const PosteriorDraws& draws, double pi, Rng& rng) {
  const auto h_total = draws.total_draws();
  if (h_total == 0) throw InputError("no posterior draws");
  const auto nu = draws.unique_cells.size();
  GlobalEstimates out;
  out.tau1_draws.resize(h_total);
  out.tau2_draws.resize(h_total);
  for (std::size_t h = 0; h < h_total; ++h) {
    double t1 = 0.0, t2 = 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
      const auto big_f = sample_population_count(draws.lambda(h, u), 1, pi, rng);
      t1 += big_f == 1 ? 1.0 : 0.0;
      t2 += 1.0 / static_cast<double>(big_f);
    }
    out.tau1_draws[h] = t1;
    out.tau2_draws[h] = t2;
  }
  out.tau1 = summarize(out.tau1_draws);
  out.tau2 = summarize(out.tau2_draws);
  return out;
}

TrueRisks true_risks(const ContingencyTable& table) {
  if (!table.has_population()) throw InputError("true risks need population counts");
  TrueRisks out;
  for (auto cell : sample_uniques(table)) {
    const auto big_f = table.population_count(cell);
    out.tau1 += big_f == 1 ? 1.0 : 0.0;
    out.tau2 += 1.0 / static_cast<double>(big_f);
  }
  return out;
}

double independent_cells_tau1_variance(std::span<const double> cell_tau1) {
  double v = 0.0;
  for (double p : cell_tau1) v += p * (1.0 - p);
  return v;
}

std::vector<CalibrationBin> calibration_bins(std::span<const CellId> cells,
                                             std::span<const double> estimates,
                                             const ContingencyTable& table, RiskMeasure measure,
                                             std::size_t n_bins) {
  if (cells.size() != estimates.size()) throw InputError("cells and estimates differ in length");
  if (n_bins == 0) throw InputError("need at least one bin");
  if (!table.has_population()) throw InputError("calibration needs population counts");
  std::vector<CalibrationBin> bins(n_bins);
  if (cells.empty()) return bins;
  const auto [lo_it, hi_it] = std::minmax_element(estimates.begin(), estimates.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = lo + width * static_cast<double>(b);
    bins[b].upper = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0)
      b = std::min(n_bins - 1, static_cast<std::size_t>((estimates[i] - lo) / width));
    const auto big_f = table.population_count(cells[i]);
    if (big_f == 0) throw InputError("population count zero in a sampled cell");
    const double observed =
        measure == RiskMeasure::Tau1 ? (big_f == 1 ? 1.0 : 0.0) : 1.0 / static_cast<double>(big_f);
    auto& bin = bins[b];
    ++bin.count;
    bin.mean_estimate += estimates[i];
    bin.mean_observed += observed;
  }
  for (auto& bin : bins) {
    if (bin.count == 0) continue;
    bin.mean_estimate /= static_cast<double>(bin.count);
    bin.mean_observed /= static_cast<double>(bin.count);
  }
  return bins;
}

}  // namespace drisk
