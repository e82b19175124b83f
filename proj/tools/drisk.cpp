// Command-line front end: run, synth and oracle spot checks.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "drisk/dp_effects.hpp"
#include "drisk/error.hpp"
#include "drisk/oracle.hpp"
#include "drisk/risk.hpp"
#include "drisk/run.hpp"
#include "drisk/synth.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw drisk::InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, std::vector<std::string> overrides,
            const std::optional<std::uint64_t>& seed, const std::string& output) {
  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  if (!output.empty()) overrides.push_back("output=\"" + output + "\"");
  const auto config = drisk::RunConfig::load(config_path, overrides);
  const auto report = drisk::run(config);
  std::cout << drisk::format_report_text(report, config.schema);
  std::cout << "\nwrote " << config.output << "\n";
  return report.converged() ? 0 : 3;
}

int cmd_synth(const std::string& config_path, const std::string& output, std::size_t replicates) {
  const auto config = drisk::SynthConfig::from_json(read_file(config_path));
  drisk::Rng rng(config.seed);
  const auto pop = drisk::synth_population(config, rng);
  fs::create_directories(output);
  {
    drisk::ContingencyTable table(pop.schema, pop.counts, config.pi);
    std::ofstream out(fs::path(output) / "population.csv");
    drisk::write_counts(out, table);
  }
  std::ofstream truth(fs::path(output) / "truth.csv");
  truth << "replicate,sample_size,sample_uniques,tau1,tau2\n";
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto sample = drisk::draw_sample(pop, config.pi, rng);
    std::ofstream out(fs::path(output) / ("sample_" + std::to_string(r) + ".csv"));
    drisk::write_counts(out, sample.table);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", sample.truth.tau1, sample.truth.tau2);
    truth << r << ',' << sample.table.sample_size() << ','
          << drisk::sample_uniques(sample.table).size() << ',' << buf << '\n';
  }
  std::cout << "population of " << pop.total << " over " << pop.schema.num_cells()
            << " cells; " << replicates << " samples written to " << output << "\n";
  return 0;
}

void print(const char* name, double v) { std::printf("%-22s %.15g\n", name, v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disclosure-risk estimation for categorical microdata"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Estimate risks from a JSON run config");
  std::string config_path, output;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  run->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config value, e.g. chains.burn_in=200");
  run->add_option("--seed", seed, "Override the run seed");
  run->add_option("--output", output, "Override the output directory");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic population and samples");
  std::string synth_config, synth_out = "synth-out";
  std::size_t replicates = 1;
  synth->add_option("config", synth_config, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--output", synth_out, "Output directory");
  synth->add_option("--replicates", replicates, "Number of pi-fraction samples")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle", "Brute-force reference computations");
  oracle->require_subcommand(1);

  auto* partitions = oracle->add_subcommand("partitions", "Count set partitions of K elements");
  std::size_t k = 3;
  partitions->add_option("k", k)->required();

  auto* posterior = oracle->add_subcommand("posterior", "Exact partition posterior of a tiny table");
  std::vector<double> f, s;
  double mass = 1.0, shape = 1.0, rate = 0.1;
  posterior->add_option("--f", f, "Cell counts")->required()->delimiter(',');
  posterior->add_option("--s", s, "Scaled predictors pi*xi")->required()->delimiter(',');
  posterior->add_option("--mass", mass);
  posterior->add_option("--shape", shape);
  posterior->add_option("--rate", rate);

  auto* marginal = oracle->add_subcommand("marginal", "Cell marginal likelihood vs quadrature");
  double mf = 1.0, ms = 1.0;
  marginal->add_option("--f", mf);
  marginal->add_option("--s", ms);
  marginal->add_option("--shape", shape);
  marginal->add_option("--rate", rate);

  auto* risk = oracle->add_subcommand("risk", "Closed-form cell risks vs Monte Carlo");
  double lambda = 1.0, pi = 0.05;
  std::size_t draws = 1000000;
  std::uint64_t mc_seed = 1;
  risk->add_option("--lambda", lambda);
  risk->add_option("--pi", pi);
  risk->add_option("--draws", draws);
  risk->add_option("--seed", mc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, overrides, seed, output);
    if (*synth) return cmd_synth(synth_config, synth_out, replicates);
    if (*partitions) {
      const auto parts = drisk::oracle::enumerate_partitions(k);
      std::printf("K=%zu partitions=%zu bell=%llu\n", k, parts.size(),
                  static_cast<unsigned long long>(drisk::oracle::bell_number(k)));
      return 0;
    }
    if (*posterior) {
      const auto post = drisk::oracle::exact_partition_posterior(f, s, mass, shape, rate);
      for (std::size_t i = 0; i < post.partitions.size(); ++i) {
        std::string label;
        for (auto b : post.partitions[i]) label += std::to_string(b);
        std::printf("%s %.12g\n", label.c_str(), post.probability[i]);
      }
      return 0;
    }
    if (*marginal) {
      const double closed = drisk::marginal_cell_loglik(mf, ms, shape, rate);
      const double lf = std::lgamma(mf + 1.0);
      const double integral = drisk::oracle::quadrature(
          [&](double w) {
            if (w <= 0.0) return 0.0;
            return std::exp(mf * std::log(ms * w) - ms * w - lf + shape * std::log(rate) -
                            std::lgamma(shape) + (shape - 1.0) * std::log(w) - rate * w);
          },
          0.0, std::numeric_limits<double>::infinity());
      print("closed_form", closed);
      print("quadrature", std::log(integral));
      return 0;
    }
    if (*risk) {
      const auto cf = drisk::cell_risk_closed_form(lambda, pi);
      drisk::Rng rng(mc_seed);
      const auto t1 = drisk::oracle::mc_reference(draws, rng, [&](drisk::Rng& g) {
        return drisk::sample_population_count(lambda, 1, pi, g) == 1 ? 1.0 : 0.0;
      });
      const auto t2 = drisk::oracle::mc_reference(draws, rng, [&](drisk::Rng& g) {
        return 1.0 / static_cast<double>(drisk::sample_population_count(lambda, 1, pi, g));
      });
      print("tau1_closed_form", cf.tau1);
      print("tau1_monte_carlo", t1.mean);
      print("tau1_mc_se", t1.standard_error);
      print("tau2_closed_form", cf.tau2);
      print("tau2_monte_carlo", t2.mean);
      print("tau2_mc_se", t2.standard_error);
      return 0;
    }
  } catch (const drisk::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
