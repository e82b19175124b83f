#include <doctest.h>

#include <cmath>
#include <numeric>

#include "drisk/error.hpp"
#include "drisk/oracle.hpp"
#include "drisk/risk.hpp"
#include "helpers.hpp"

using namespace drisk;
using testing::schema_of;

namespace {

PosteriorDraws draws_of(std::size_t uniques, std::size_t h, const std::function<double(std::size_t, std::size_t)>& lambda) {
  PosteriorDraws d;
  for (std::size_t u = 0; u < uniques; ++u) d.unique_cells.push_back(u);
  d.draws_per_chain = h;
  d.chains.resize(1);
  for (std::size_t t = 0; t < h; ++t)
    for (std::size_t u = 0; u < uniques; ++u) d.chains[0].lambda.push_back(lambda(t, u));
  return d;
}

}  // namespace

TEST_CASE("closed-form cell risks") {
  const auto zero = cell_risk_closed_form(0.0, 0.05);
  CHECK(zero.tau1 == 1.0);
  CHECK(zero.tau2 == 1.0);
  const auto tiny = cell_risk_closed_form(1e-12, 0.05);
  CHECK(tiny.tau1 == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(tiny.tau2 == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(cell_risk_closed_form(std::log(2.0) / 0.95, 0.05).tau1 == doctest::Approx(0.5).epsilon(1e-14));
  const auto one = cell_risk_closed_form(1.0, 0.05);
  CHECK(one.tau1 == doctest::Approx(0.38674102345450120692).epsilon(1e-14));
  CHECK(one.tau2 == doctest::Approx(0.64553576478473557167).epsilon(1e-14));

  // Continuity across the series threshold, and tau1 <= tau2 <= 1 everywhere.
  const double x0 = kSeriesThreshold / 0.95;
  CHECK(cell_risk_closed_form(x0 * (1 - 1e-9), 0.05).tau2 ==
        doctest::Approx(cell_risk_closed_form(x0 * (1 + 1e-9), 0.05).tau2).epsilon(1e-14));
  for (double lam = 1e-10; lam < 1e4; lam *= 3.7) {
    const auto r = cell_risk_closed_form(lam, 0.3);
    CHECK(r.tau1 <= r.tau2);
    CHECK(r.tau2 <= 1.0);
    CHECK(r.tau1 >= 0.0);
  }
}

TEST_CASE("population remainder draws") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_population_count(0.0, 3, 0.05, rng) == 3);
  for (int i = 0; i < 1000; ++i) CHECK(sample_population_count(4.0, 2, 0.05, rng) >= 2);

  const auto p1 = oracle::mc_reference(1000000, rng, [](Rng& g) {
    return sample_population_count(1.0, 1, 0.05, g) == 1 ? 1.0 : 0.0;
  });
  CHECK(std::abs(p1.mean - std::exp(-0.95)) < 3 * p1.standard_error);
  const auto p2 = oracle::mc_reference(1000000, rng, [](Rng& g) {
    return 1.0 / static_cast<double>(sample_population_count(1.0, 1, 0.05, g));
  });
  CHECK(std::abs(p2.mean - cell_risk_closed_form(1.0, 0.05).tau2) < 3 * p2.standard_error);
}

TEST_CASE("summaries and nearest-rank percentiles") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const auto s = summarize(v);
  CHECK(s.mean == 50.5);
  CHECK(s.percentiles[0] == 3.0);   // ceil(2.5) = 3
  CHECK(s.percentiles[1] == 5.0);
  CHECK(s.percentiles[2] == 50.0);
  CHECK(s.percentiles[3] == 95.0);
  CHECK(s.percentiles[4] == 98.0);
  const std::vector<double> flat(20, 2.5);
  CHECK(summarize(flat).sd == 0.0);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), InputError);
}

TEST_CASE("global star estimates") {
  const auto single = global_star_estimates(draws_of(1, 1, [](auto, auto) { return 0.0; }), 0.05);
  CHECK(single.tau1.mean == 1.0);
  CHECK(single.tau2.mean == 1.0);

  const auto constant = global_star_estimates(draws_of(3, 50, [](auto, std::size_t u) { return 1.0 + u; }), 0.1);
  CHECK(constant.tau1.sd == 0.0);
  CHECK(constant.tau2.sd == 0.0);

  // Linear in the per-cell contributions.
  Rng rng(2);
  std::vector<double> lam(5 * 40);
  for (auto& l : lam) l = draw_gamma(rng, 2.0, 1.0);
  const auto all = global_star_estimates(draws_of(5, 40, [&](std::size_t t, std::size_t u) { return lam[t * 5 + u]; }), 0.1);
  const auto four = global_star_estimates(draws_of(4, 40, [&](std::size_t t, std::size_t u) { return lam[t * 5 + u]; }), 0.1);
  CHECK(all.tau1.mean - four.tau1.mean == doctest::Approx(all.cell_tau1[4]).epsilon(1e-12));
  CHECK(all.tau2.mean - four.tau2.mean == doctest::Approx(all.cell_tau2[4]).epsilon(1e-12));
  for (std::size_t u = 0; u < 5; ++u) {
    CHECK(all.cell_tau1[u] <= all.cell_tau2[u]);
    CHECK(all.cell_tau2[u] <= 1.0);
  }
  CHECK(all.tau1.mean <= all.tau2.mean);
  CHECK(all.tau2.mean <= 5.0);
}

TEST_CASE("fully Bayesian estimates") {
  Rng rng(3);
  const auto degenerate = global_full_bayes(draws_of(7, 30, [](auto, auto) { return 0.0; }), 0.05, rng);
  CHECK(degenerate.tau1.mean == 7.0);
  CHECK(degenerate.tau2.mean == 7.0);
  CHECK(degenerate.tau1.sd == 0.0);

  // Cells independent across draws: the empirical variance of tau1 matches
  // the sum of per-cell Bernoulli variances.
  std::vector<double> lam(60 * 20000);
  for (auto& l : lam) l = draw_gamma(rng, 1.5, 1.0);
  const auto d = draws_of(60, 20000, [&](std::size_t t, std::size_t u) { return lam[t * 60 + u]; });
  const auto star = global_star_estimates(d, 0.05);
  const auto full = global_full_bayes(d, 0.05, rng);
  const double indep = independent_cells_tau1_variance(star.cell_tau1);
  CHECK(full.tau1.sd * full.tau1.sd == doctest::Approx(indep).epsilon(0.05));
  CHECK(std::abs(full.tau1.mean - star.tau1.mean) < 3 * full.tau1.sd / std::sqrt(20000.0));
  CHECK(std::abs(full.tau2.mean - star.tau2.mean) < 3 * full.tau2.sd / std::sqrt(20000.0));
  CHECK(full.tau1.sd > star.tau1.sd);
}

TEST_CASE("true risks by recount") {
  const auto s = schema_of({2, 3});
  const ContingencyTable t(s, {{0, 1}, {1, 1}, {2, 2}, {4, 1}}, 0.1, {},
                           std::vector<std::pair<CellId, Count>>{{0, 1}, {1, 4}, {2, 5}, {4, 2}, {5, 3}});
  const auto r = true_risks(t);
  CHECK(r.tau1 == 1.0);
  CHECK(r.tau2 == doctest::Approx(1.0 + 0.25 + 0.5).epsilon(1e-15));
  CHECK_THROWS_AS(true_risks(t.without_population()), InputError);
}

TEST_CASE("calibration bins") {
  const auto s = schema_of({10});
  std::vector<std::pair<CellId, Count>> sample, pop;
  for (CellId k = 0; k < 10; ++k) {
    sample.emplace_back(k, 1);
    pop.emplace_back(k, 1 + k % 3);
  }
  const ContingencyTable t(s, sample, 0.1, {}, pop);
  const auto cells = sample_uniques(t);
  std::vector<double> est(10);
  for (std::size_t i = 0; i < 10; ++i) est[i] = 0.05 * static_cast<double>(i * i % 7);
  for (auto measure : {RiskMeasure::Tau1, RiskMeasure::Tau2}) {
    const auto bins = calibration_bins(cells, est, t, measure, 4);
    std::size_t total = 0;
    double prev = -1.0;
    for (const auto& b : bins) {
      total += b.count;
      if (b.count == 0) continue;
      CHECK(b.mean_estimate >= b.lower - 1e-15);
      CHECK(b.mean_estimate <= b.upper + 1e-15);
      CHECK(b.mean_estimate > prev);
      prev = b.mean_estimate;
    }
    CHECK(total == 10);
    // Recompute the first bin from the raw values.
    const double width = 0.2 / 4;  // estimates span [0, 0.2]
    double sum_obs = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 10; ++i)
      if (est[i] < width) {
        const double big_f = 1.0 + static_cast<double>(i % 3);
        sum_obs += measure == RiskMeasure::Tau1 ? (big_f == 1.0) : 1.0 / big_f;
        ++n;
      }
    CHECK(bins[0].count == n);
    CHECK(bins[0].mean_observed == doctest::Approx(sum_obs / static_cast<double>(n)));
  }

  const std::vector<double> flat(10, 0.5);
  const auto one = calibration_bins(cells, flat, t, RiskMeasure::Tau1, 10);
  CHECK(one[0].count == 10);
  CHECK(one[0].mean_estimate == 0.5);
  CHECK_THROWS_AS(calibration_bins(cells, flat, t.without_population(), RiskMeasure::Tau1), InputError);
}
