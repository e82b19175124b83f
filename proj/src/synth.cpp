#include "drisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "drisk/error.hpp"

namespace drisk {

void SynthConfig::validate() const {
  if (schema.num_variables() == 0) throw InputError("synthetic schema has no variables");
  if (schema.num_cells() > kDefaultDenseThreshold)
    throw InputError("synthetic schema too large to materialize");
  const auto q = design_columns(design, schema.cardinalities());
  if (!beta.empty() && beta.size() != q)
    throw InputError("beta has " + std::to_string(beta.size()) + " entries but the " +
                     std::string(to_string(design)) + " design has " + std::to_string(q) +
                     " columns");
  if (effects == Effects::Clusters) {
    if (cluster_effects.empty() || cluster_effects.size() != cluster_weights.size())
      throw InputError("cluster effects and weights must be nonempty and of equal length");
    for (double v : cluster_effects)
      if (!(v > 0.0)) throw InputError("cluster effects must be positive");
    double total = 0.0;
    for (double w : cluster_weights) {
      if (!(w >= 0.0)) throw InputError("cluster weights must be nonnegative");
      total += w;
    }
    if (!(total > 0.0)) throw InputError("cluster weights sum to zero");
  } else if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0)) {
    throw InputError("gamma effect parameters must be positive");
  }
  if (population_size == 0) throw InputError("population size must be positive");
  if (!(pi > 0.0 && pi < 1.0)) throw InputError("pi must lie in (0, 1)");
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<KeyVariable> vars;
    for (const auto& v : j.at("schema"))
      vars.push_back({v.at("name").get<std::string>(), v.at("cardinality").get<std::uint32_t>()});
    c.schema = KeySchema(std::move(vars));
    if (j.contains("design")) c.design = parse_design_kind(j["design"].get<std::string>());
    if (j.contains("beta")) c.beta = j["beta"].get<std::vector<double>>();
    if (j.contains("effects")) {
      const auto& e = j["effects"];
      const auto kind = e.value("kind", std::string("clusters"));
      if (kind == "clusters") {
        c.effects = Effects::Clusters;
        if (e.contains("values")) c.cluster_effects = e["values"].get<std::vector<double>>();
        c.cluster_weights = e.contains("weights")
                                ? e["weights"].get<std::vector<double>>()
                                : std::vector<double>(c.cluster_effects.size(), 1.0);
      } else if (kind == "gamma") {
        c.effects = Effects::Gamma;
        c.gamma_shape = e.value("shape", 1.0);
        c.gamma_rate = e.value("rate", c.gamma_shape);
      } else {
        throw InputError("unknown effect kind '" + kind + "'");
      }
    }
    c.population_size = j.value("population_size", c.population_size);
    c.pi = j.value("pi", c.pi);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

SyntheticPopulation synth_population(const SynthConfig& config, Rng& rng) {
  config.validate();
  const auto& schema = config.schema;
  const DesignSpec spec(config.design, schema);
  const auto k = schema.num_cells();

  SyntheticPopulation pop;
  pop.schema = schema;
  pop.lambda.resize(k);
  pop.omega.resize(k);

  std::vector<double> cumulative;
  if (config.effects == SynthConfig::Effects::Clusters) {
    cumulative.resize(config.cluster_weights.size());
    std::partial_sum(config.cluster_weights.begin(), config.cluster_weights.end(),
                     cumulative.begin());
  }

  std::vector<std::uint32_t> codes(schema.num_variables());
  std::vector<std::uint32_t> cols;
  double total = 0.0;
  for (CellId cell = 0; cell < k; ++cell) {
    schema.decode(cell, codes);
    cols.clear();
    spec.row(codes, cols);
    double eta = 0.0;
    if (!config.beta.empty())
      for (auto c : cols) eta += config.beta[c];
    double omega = 1.0;
    if (config.effects == SynthConfig::Effects::Clusters) {
      const double u = draw_uniform(rng) * cumulative.back();
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      omega = config.cluster_effects[static_cast<std::size_t>(it - cumulative.begin())];
    } else {
      omega = draw_gamma(rng, config.gamma_shape, config.gamma_rate);
    }
    pop.omega[cell] = omega;
    pop.lambda[cell] = std::exp(eta) * omega;
    total += pop.lambda[cell];
  }
  const double n = static_cast<double>(config.population_size);
  for (CellId cell = 0; cell < k; ++cell) {
    pop.lambda[cell] *= n / total;
    const auto f = draw_poisson(rng, pop.lambda[cell]);
    if (f > 0) {
      pop.counts.emplace_back(cell, f);
      pop.total += f;
    }
  }
  return pop;
}

SyntheticSample draw_sample(const SyntheticPopulation& population, double pi, Rng& rng) {
  if (!(pi > 0.0 && pi < 1.0)) throw InputError("pi must lie in (0, 1)");
  std::vector<std::pair<CellId, Count>> sample;
  for (const auto& [cell, big_f] : population.counts) {
    const auto f = draw_binomial(rng, big_f, pi);
    if (f > 0) sample.emplace_back(cell, f);
  }
  SyntheticSample out{ContingencyTable(population.schema, std::move(sample), pi, {},
                                       population.counts),
                      {}};
  out.truth = true_risks(out.table);
  return out;
}

}  // namespace drisk
