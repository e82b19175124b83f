#include "drisk/run.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "drisk/error.hpp"

#ifndef DRISK_GIT_VERSION
#define DRISK_GIT_VERSION "unknown"
#endif

namespace drisk {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view source_version() { return DRISK_GIT_VERSION; }

// ---------------------------------------------------------------------------
// Model labels

std::string ModelKind::label() const {
  if (ipf_baseline) return std::string(to_string(design)) + "-IPF";
  return std::string(to_string(effects)) + "+" + std::string(to_string(design));
}

ModelKind ModelKind::parse(std::string_view label) {
  ModelKind k;
  constexpr std::string_view ipf = "-IPF";
  if (label.size() > ipf.size() && label.substr(label.size() - ipf.size()) == ipf) {
    k.ipf_baseline = true;
    k.design = parse_design_kind(label.substr(0, label.size() - ipf.size()));
    return k;
  }
  const auto plus = label.find('+');
  if (plus == std::string_view::npos)
    throw InputError("model '" + std::string(label) + "' is not of the form P+I, NP+II or II-IPF");
  k.effects = parse_random_effects(label.substr(0, plus));
  k.design = parse_design_kind(label.substr(plus + 1));
  return k;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InputError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InputError("unknown config key '" + std::string(where) + "." + key + "'");
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InputError("override '" + assignment + "' is not of the form key.path=value");
  const auto path = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InputError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

std::string resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key)) return {};
  fs::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p.string();
  return (base / p).lexically_normal().string();
}

std::string_view to_string(ScanOrder s) {
  return s == ScanOrder::Ascending ? "ascending" : "random";
}

ScanOrder parse_scan(const std::string& s) {
  if (s == "ascending") return ScanOrder::Ascending;
  if (s == "random") return ScanOrder::RandomPermutation;
  throw InputError("unknown scan order '" + s + "' (expected ascending or random)");
}

}  // namespace

void RunConfig::validate() const {
  if (schema.num_variables() == 0) throw InputError("schema has no variables");
  if (!(pi > 0.0 && pi < 1.0)) throw InputError("pi must lie in (0, 1)");
  priors.validate();
  if (model.ipf_baseline) {
    if (mode != EstimationMode::FullBayes)
      throw InputError("IPF baselines take no estimation mode");
    return;  // MCMC settings are ignored
  }
  chains.validate();
  if (mode == EstimationMode::EmpiricalBayes &&
      (model.effects != RandomEffects::Nonparametric || model.design == DesignKind::OverallMean))
    throw InputError("empirical-bayes requires nonparametric effects with an I or II design");
  if (mode == EstimationMode::LaplaceBeta && model.effects != RandomEffects::Parametric)
    throw InputError("laplace-beta requires parametric random effects");
  if (calibration_bins == 0) throw InputError("calibration_bins must be positive");
}

std::string RunConfig::to_json() const {
  json j;
  j["input"] = {{"microdata", input.microdata},
                {"counts", input.counts},
                {"population", input.population},
                {"structural_zeros", input.structural_zeros},
                {"labels", input.labels},
                {"delimiter", std::string(1, input.delimiter)}};
  json vars = json::array();
  for (const auto& v : schema.variables())
    vars.push_back({{"name", v.name}, {"cardinality", v.cardinality}});
  j["schema"] = vars;
  j["pi"] = pi;
  j["model"] = model.label();
  j["mode"] = std::string(drisk::to_string(mode));
  j["priors"] = {{"beta_variance", priors.beta_variance},
                 {"base_shape", priors.base_shape},
                 {"base_rate", priors.base_rate},
                 {"mass_shape", priors.mass_shape},
                 {"mass_rate", priors.mass_rate}};
  j["chains"] = {{"n_chains", chains.n_chains},
                 {"burn_in", chains.burn_in},
                 {"keep", chains.keep},
                 {"thin", chains.thin},
                 {"epsilon", chains.epsilon},
                 {"adapt_epsilon", chains.adapt_epsilon},
                 {"scan", std::string(to_string(chains.scan))},
                 {"rhat_threshold", chains.rhat_threshold},
                 {"audit_every", chains.audit_every},
                 {"monitored_uniques", chains.monitored_uniques},
                 {"threads", chains.max_threads},
                 {"chain_seeds", chains.chain_seeds},
                 {"resume", resume}};
  j["seed"] = chains.seed;
  j["output"] = output;
  j["report"] = {{"calibration_bins", calibration_bins}, {"checkpoints", write_checkpoints}};
  return j.dump(2);
}

std::string RunConfig::hash() const {
  // Where results land and how many threads compute them do not change them.
  auto j = json::parse(to_json());
  j.erase("output");
  j["chains"].erase("threads");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

RunConfig RunConfig::from_json(const std::string& text, const fs::path& base,
                               std::span<const std::string> overrides) {
  RunConfig c;
  try {
    json j = json::parse(text);
    for (const auto& o : overrides) apply_override(j, o);
    check_keys(j, "config",
               {"input", "schema", "pi", "model", "mode", "priors", "chains", "seed", "output",
                "report"});

    const auto& in = j.contains("input") ? j["input"] : json::object();
    check_keys(in, "input",
               {"microdata", "counts", "population", "structural_zeros", "labels", "delimiter"});
    c.input.microdata = resolve(in, "microdata", base);
    c.input.counts = resolve(in, "counts", base);
    c.input.population = resolve(in, "population", base);
    c.input.structural_zeros = resolve(in, "structural_zeros", base);
    c.input.labels = resolve(in, "labels", base);
    if (in.contains("delimiter")) {
      const auto d = in["delimiter"].get<std::string>();
      if (d.size() != 1) throw InputError("input.delimiter must be a single character");
      c.input.delimiter = d[0];
    }

    std::vector<KeyVariable> vars;
    for (const auto& v : j.at("schema")) {
      check_keys(v, "schema[]", {"name", "cardinality"});
      vars.push_back({v.at("name").get<std::string>(), v.at("cardinality").get<std::uint32_t>()});
    }
    c.schema = KeySchema(std::move(vars));
    c.pi = j.at("pi").get<double>();
    if (j.contains("model")) c.model = ModelKind::parse(j["model"].get<std::string>());
    if (j.contains("mode")) c.mode = parse_estimation_mode(j["mode"].get<std::string>());

    if (j.contains("priors")) {
      const auto& p = j["priors"];
      check_keys(p, "priors", {"beta_variance", "base_shape", "base_rate", "mass_shape", "mass_rate"});
      c.priors.beta_variance = p.value("beta_variance", c.priors.beta_variance);
      c.priors.base_shape = p.value("base_shape", c.priors.base_shape);
      c.priors.base_rate = p.value("base_rate", c.priors.base_rate);
      c.priors.mass_shape = p.value("mass_shape", c.priors.mass_shape);
      c.priors.mass_rate = p.value("mass_rate", c.priors.mass_rate);
    }
    if (j.contains("chains")) {
      const auto& ch = j["chains"];
      check_keys(ch, "chains",
                 {"n_chains", "burn_in", "keep", "thin", "epsilon", "adapt_epsilon", "scan",
                  "rhat_threshold", "audit_every", "monitored_uniques", "threads", "chain_seeds",
                  "resume"});
      auto& k = c.chains;
      k.n_chains = ch.value("n_chains", k.n_chains);
      k.burn_in = ch.value("burn_in", k.burn_in);
      k.keep = ch.value("keep", k.keep);
      k.thin = ch.value("thin", k.thin);
      k.epsilon = ch.value("epsilon", k.epsilon);
      k.adapt_epsilon = ch.value("adapt_epsilon", k.adapt_epsilon);
      if (ch.contains("scan")) k.scan = parse_scan(ch["scan"].get<std::string>());
      k.rhat_threshold = ch.value("rhat_threshold", k.rhat_threshold);
      k.audit_every = ch.value("audit_every", k.audit_every);
      k.monitored_uniques = ch.value("monitored_uniques", k.monitored_uniques);
      k.max_threads = ch.value("threads", k.max_threads);
      if (ch.contains("chain_seeds"))
        k.chain_seeds = ch["chain_seeds"].get<std::vector<std::uint64_t>>();
      c.resume = resolve(ch, "resume", base);
    }
    c.chains.seed = j.value("seed", c.chains.seed);
    if (j.contains("output")) {
      fs::path out = j["output"].get<std::string>();
      c.output = (out.is_absolute() || base.empty()) ? out.string()
                                                     : (base / out).lexically_normal().string();
    }
    if (j.contains("report")) {
      const auto& r = j["report"];
      check_keys(r, "report", {"calibration_bins", "checkpoints"});
      c.calibration_bins = r.value("calibration_bins", c.calibration_bins);
      c.write_checkpoints = r.value("checkpoints", c.write_checkpoints);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// Estimation

namespace {

template <typename Fn>
auto in_stage(std::string_view stage, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError(std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

std::ifstream open_input(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + std::string(what) + " file " + path);
  return in;
}

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

constexpr std::uint64_t kRiskStream = 0x7269736bULL;

}  // namespace

ContingencyTable load_table(const RunConfig& config) {
  return in_stage("table", [&] {
    const auto& in = config.input;
    if (in.counts.empty() == in.microdata.empty())
      throw InputError("exactly one of input.counts and input.microdata must be given");
    LabelMap labels;
    if (!in.labels.empty()) {
      auto s = open_input(in.labels, "label");
      labels = read_label_map(s, in.delimiter);
    }
    ContingencyTable table;
    if (!in.counts.empty()) {
      auto s = open_input(in.counts, "counts");
      table = read_counts(s, config.schema, config.pi, in.delimiter, labels);
    } else {
      auto s = open_input(in.microdata, "microdata");
      table = read_microdata(s, config.schema, config.pi, in.delimiter, labels);
    }
    std::vector<CellId> zeros;
    if (!in.structural_zeros.empty()) {
      auto s = open_input(in.structural_zeros, "structural-zero");
      zeros = read_structural_zero_patterns(s, config.schema, in.delimiter, labels);
    }
    std::optional<std::vector<std::pair<CellId, Count>>> population;
    if (table.has_population()) {
      const auto p = table.population_counts();
      population.emplace(p.begin(), p.end());
    }
    if (!in.population.empty()) {
      if (population) throw InputError("population counts given twice");
      auto s = open_input(in.population, "population");
      const auto pop = read_counts(s, config.schema, config.pi, in.delimiter, labels);
      const auto p = pop.nonzero_counts();
      population.emplace(p.begin(), p.end());
    }
    const auto sample = table.nonzero_counts();
    return ContingencyTable(config.schema, {sample.begin(), sample.end()}, config.pi,
                            std::move(zeros), std::move(population));
  });
}

RiskReport estimate(const RunConfig& config, const ContingencyTable& table) {
  config.validate();
  if (!(table.schema() == config.schema)) throw InputError("table schema differs from the config");
  const ContingencyTable est = table.without_population();
  const double pi = est.sampling_fraction();

  RiskReport r;
  r.model = config.model;
  r.mode = config.mode;
  r.sample_size = est.sample_size();
  r.nonzero_cells = est.nonzero_counts().size();
  r.effective_cells = est.num_effective_cells();

  PosteriorDraws draws;
  if (config.model.ipf_baseline) {
    r.plug_in = true;
    const auto fit = in_stage("samplers", [&] { return ipf_fit(est, config.model.design); });
    if (!fit.converged)
      throw Error("samplers: IPF did not converge (max margin error " + fmt(fit.max_margin_error) +
                  ")");
    r.ipf_iterations = fit.iterations;
    draws.unique_cells = sample_uniques(est);
    draws.draws_per_chain = 1;
    draws.chains.resize(1);
    for (auto cell : draws.unique_cells) {
      const auto it = std::lower_bound(fit.cells.begin(), fit.cells.end(), cell);
      draws.chains[0].lambda.push_back(fit.fitted[static_cast<std::size_t>(it - fit.cells.begin())] /
                                       pi);
    }
  } else {
    r.mcmc = true;
    const auto design = in_stage("design", [&] {
      return build_design(DesignSpec(config.model.design, config.schema), est);
    });
    const PoissonLogLinear model(est, design);
    std::vector<double> fixed_beta;
    if (config.mode == EstimationMode::EmpiricalBayes) {
      fixed_beta = in_stage("samplers", [&] {
        const auto fit = ipf_fit(est, config.model.design);
        if (!fit.converged)
          throw ConvergenceError("IPF for the empirical-Bayes beta did not converge",
                                 fit.max_margin_error);
        return beta_from_fitted(design, fit);
      });
    }
    std::vector<ChainCheckpoint> resume;
    if (!config.resume.empty()) {
      in_stage("samplers", [&] {
        for (std::size_t c = 0; c < config.chains.n_chains; ++c) {
          auto path = fs::path(config.resume) / ("chain_" + std::to_string(c) + ".json");
          auto s = open_input(path.string(), "checkpoint");
          std::stringstream ss;
          ss << s.rdbuf();
          resume.push_back(ChainCheckpoint::from_json(ss.str()));
        }
        return 0;
      });
    }
    auto chain_run = in_stage("samplers", [&] {
      return run_chains(est, model, config.priors, config.chains,
                        SamplerSpec{config.model.effects, config.mode}, fixed_beta, resume);
    });
    draws = std::move(chain_run.draws);
    r.diagnostics = std::move(chain_run.diagnostics);
    std::size_t accepted = 0, proposals = 0;
    double clusters = 0.0;
    std::size_t cluster_draws = 0;
    for (auto& ch : draws.chains) {
      accepted += ch.accepted;
      proposals += ch.proposals;
      r.aborted_steps += ch.aborted;
      for (auto c : ch.clusters) clusters += static_cast<double>(c);
      cluster_draws += ch.clusters.size();
      r.checkpoints.push_back(ch.checkpoint);
    }
    r.acceptance_rate = proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
    r.mean_clusters = cluster_draws ? clusters / static_cast<double>(cluster_draws) : 0.0;
  }

  in_stage("risk", [&] {
    r.star = global_star_estimates(draws, pi);
    if (r.mcmc) {
      Rng rng(derive_seed(config.chains.seed, kRiskStream));
      r.full = global_full_bayes(draws, pi, rng);
    }
    if (table.has_population()) {
      r.truth = true_risks(table);
      r.calibration_tau1 = calibration_bins(r.star.cells, r.star.cell_tau1, table,
                                            RiskMeasure::Tau1, config.calibration_bins);
      r.calibration_tau2 = calibration_bins(r.star.cells, r.star.cell_tau2, table,
                                            RiskMeasure::Tau2, config.calibration_bins);
      for (auto cell : r.star.cells) r.unique_population.push_back(table.population_count(cell));
    }
    return 0;
  });

  auto& m = r.metadata;
  m.emplace_back("config_hash", config.hash());
  m.emplace_back("source_version", std::string(source_version()));
  m.emplace_back("seed", std::to_string(config.chains.seed));
  m.emplace_back("model", config.model.label());
  m.emplace_back("mode", config.model.ipf_baseline ? "plug-in" : std::string(to_string(config.mode)));
  m.emplace_back("design_coding", std::string(DesignSpec::coding()));
  m.emplace_back("sampling_model", "f_k ~ Poisson(pi * lambda_k), lambda_k = exp(w_k'beta) * omega_k");
  m.emplace_back("population_remainder", "F_k = f_k + Poisson((1 - pi) * lambda_k)");
  m.emplace_back("prior_beta", "independent normal, mean 0, variance " + fmt(config.priors.beta_variance, "%g"));
  m.emplace_back("prior_base_measure", "omega ~ Gamma(shape " + fmt(config.priors.base_shape, "%g") +
                                           ", rate " + fmt(config.priors.base_rate, "%g") + ")");
  m.emplace_back("prior_mass", "m ~ Gamma(shape " + fmt(config.priors.mass_shape, "%g") +
                                   ", rate " + fmt(config.priors.mass_rate, "%g") + ")");
  m.emplace_back("percentile_method", "nearest rank over per-draw global values");
  m.emplace_back("small_x_series_threshold", fmt(kSeriesThreshold, "%g"));
  if (r.mcmc) {
    const auto& ch = config.chains;
    m.emplace_back("chains", std::to_string(ch.n_chains));
    m.emplace_back("burn_in", config.resume.empty() ? std::to_string(ch.burn_in) : "0 (resumed)");
    m.emplace_back("keep", std::to_string(ch.keep));
    m.emplace_back("thin", std::to_string(ch.thin));
    m.emplace_back("scan_order", std::string(to_string(ch.scan)));
    m.emplace_back("step_size", "initial " + fmt(ch.epsilon, "%g") +
                                    (ch.adapt_epsilon ? ", adapted during burn-in toward acceptance 0.5-0.7"
                                                      : ", fixed"));
    m.emplace_back("rhat_threshold", fmt(ch.rhat_threshold, "%g"));
    m.emplace_back("rhat_monitored",
                   "beta, log mass, cluster count and log lambda for up to " +
                       std::to_string(ch.monitored_uniques) +
                       " sample uniques chosen by a seed-derived shuffle");
    if (config.mode == EstimationMode::EmpiricalBayes)
      m.emplace_back("empirical_beta", "least-squares log-linear fit to IPF fitted values; intercept dropped");
    if (config.mode == EstimationMode::LaplaceBeta)
      m.emplace_back("laplace_beta", "Gaussian at the mode of the negative-binomial marginal posterior");
  } else {
    m.emplace_back("ipf_iterations", std::to_string(r.ipf_iterations));
    m.emplace_back("plug_in", "lambda_k = fitted_k / pi");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

void kv_summary(std::ostringstream& o, const std::string& prefix, const Summary& s, bool with_spread) {
  o << prefix << ".mean=" << fmt(s.mean) << '\n';
  if (!with_spread) return;
  o << prefix << ".sd=" << fmt(s.sd) << '\n';
  static constexpr const char* names[] = {"p2.5", "p5", "p50", "p95", "p97.5"};
  for (std::size_t i = 0; i < kReportedPercentiles.size(); ++i)
    o << prefix << '.' << names[i] << '=' << fmt(s.percentiles[i]) << '\n';
}

void text_row(std::ostringstream& o, const char* name, const Summary& s, bool with_spread) {
  char buf[256];
  if (with_spread) {
    std::snprintf(buf, sizeof buf, "  %-8s %10.2f %9.2f %9.2f %9.2f %9.2f %9.2f %9.2f\n", name,
                  s.mean, s.sd, s.percentiles[0], s.percentiles[1], s.percentiles[2],
                  s.percentiles[3], s.percentiles[4]);
  } else {
    std::snprintf(buf, sizeof buf, "  %-8s %10.2f %9s %9s %9s %9s %9s %9s\n", name, s.mean, "-",
                  "-", "-", "-", "-", "-");
  }
  o << buf;
}

}  // namespace

std::string format_report_text(const RiskReport& r, const KeySchema& schema) {
  std::ostringstream o;
  if (!r.converged()) o << "*** NOT-CONVERGED: max R-hat " << fmt(r.diagnostics.max_rhat, "%.3f") << " ***\n\n";
  o << "Disclosure risk report\n\n";
  o << "  model            " << r.model.label();
  if (!r.plug_in) o << " (" << to_string(r.mode) << ")";
  else o << " (plug-in)";
  o << "\n  key variables    ";
  for (std::size_t j = 0; j < schema.num_variables(); ++j)
    o << (j ? ", " : "") << schema.variable(j).name << " (" << schema.variable(j).cardinality << ")";
  o << "\n  cells            " << schema.num_cells() << " (" << r.effective_cells
    << " not structural zeros)\n";
  o << "  sample size      " << r.sample_size << " in " << r.nonzero_cells << " nonzero cells\n";
  o << "  sample uniques   " << r.star.cells.size() << "\n\n";

  const bool spread = !r.plug_in;
  o << "  measure    estimate        sd      2.5%        5%       50%       95%     97.5%\n";
  text_row(o, "tau1*", r.star.tau1, spread);
  text_row(o, "tau2*", r.star.tau2, spread);
  if (r.full) {
    text_row(o, "tau1", r.full->tau1, true);
    text_row(o, "tau2", r.full->tau2, true);
  }
  if (r.truth) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "\n  true tau1 = %.0f, true tau2 = %.2f\n", r.truth->tau1, r.truth->tau2);
    o << buf;
  }
  if (r.mcmc) {
    o << "\nSampler\n";
    o << "  draws kept       " << r.star.tau1_draws.size() << "\n";
    if (r.mode == EstimationMode::FullBayes)
      o << "  SMMALA accept    " << fmt(r.acceptance_rate, "%.3f") << " (" << r.aborted_steps
        << " aborted)\n";
    if (r.model.effects == RandomEffects::Nonparametric)
      o << "  mean clusters    " << fmt(r.mean_clusters, "%.2f") << "\n";
    o << "  max R-hat        ";
    if (r.diagnostics.rhat.empty()) o << "not assessed (needs >= 2 chains and >= 10 draws)";
    else o << fmt(r.diagnostics.max_rhat, "%.4f") << " over " << r.diagnostics.rhat.size() << " scalars";
    o << (r.diagnostics.converged ? ", converged\n" : ", NOT-CONVERGED\n");
  }
  o << "\nRun metadata\n";
  for (const auto& [k, v] : r.metadata) o << "  " << k << ": " << v << "\n";
  return o.str();
}

std::string format_report_kv(const RiskReport& r) {
  std::ostringstream o;
  for (const auto& [k, v] : r.metadata) o << "meta." << k << '=' << v << '\n';
  o << "status=" << (r.converged() ? "converged" : "NOT-CONVERGED") << '\n';
  o << "sample_size=" << r.sample_size << '\n';
  o << "nonzero_cells=" << r.nonzero_cells << '\n';
  o << "sample_uniques=" << r.star.cells.size() << '\n';
  const bool spread = !r.plug_in;
  kv_summary(o, "tau1_star", r.star.tau1, spread);
  kv_summary(o, "tau2_star", r.star.tau2, spread);
  if (r.full) {
    kv_summary(o, "tau1", r.full->tau1, true);
    kv_summary(o, "tau2", r.full->tau2, true);
    o << "tau1_star.independent_cells_sd="
      << fmt(std::sqrt(independent_cells_tau1_variance(r.star.cell_tau1))) << '\n';
  }
  if (r.truth) {
    o << "true.tau1=" << fmt(r.truth->tau1) << '\n';
    o << "true.tau2=" << fmt(r.truth->tau2) << '\n';
  }
  if (r.mcmc) {
    o << "draws=" << r.star.tau1_draws.size() << '\n';
    o << "smmala.acceptance=" << fmt(r.acceptance_rate) << '\n';
    o << "smmala.aborted=" << r.aborted_steps << '\n';
    o << "clusters.mean=" << fmt(r.mean_clusters) << '\n';
    o << "rhat.max=" << fmt(r.diagnostics.max_rhat) << '\n';
    o << "rhat.monitored=" << r.diagnostics.rhat.size() << '\n';
  }
  return o.str();
}

std::string format_percell_csv(const RiskReport& r, const ContingencyTable& table) {
  const auto& schema = table.schema();
  std::ostringstream o;
  o << "cell";
  for (const auto& v : schema.variables()) o << ',' << v.name;
  o << ",f,tau1_star,tau2_star";
  const bool bench = !r.unique_population.empty();
  if (bench) o << ",population_count";
  o << '\n';
  std::vector<std::uint32_t> codes(schema.num_variables());
  for (std::size_t u = 0; u < r.star.cells.size(); ++u) {
    schema.decode(r.star.cells[u], codes);
    o << r.star.cells[u];
    for (auto c : codes) o << ',' << c;
    o << ",1," << fmt(r.star.cell_tau1[u]) << ',' << fmt(r.star.cell_tau2[u]);
    if (bench) o << ',' << r.unique_population[u];
    o << '\n';
  }
  return o.str();
}

std::string format_calibration_csv(std::span<const CalibrationBin> bins) {
  std::ostringstream o;
  o << "bin,lower,upper,count,mean_estimate,mean_observed\n";
  for (std::size_t b = 0; b < bins.size(); ++b)
    o << b << ',' << fmt(bins[b].lower) << ',' << fmt(bins[b].upper) << ',' << bins[b].count << ','
      << fmt(bins[b].mean_estimate) << ',' << fmt(bins[b].mean_observed) << '\n';
  return o.str();
}

std::string format_diagnostics_csv(const Diagnostics& d) {
  std::ostringstream o;
  o << "parameter,rhat\n";
  for (std::size_t i = 0; i < d.names.size(); ++i) {
    std::string name = d.names[i];
    if (name.find(',') != std::string::npos) name = '"' + name + '"';
    o << name << ',' << fmt(d.rhat[i]) << '\n';
  }
  return o.str();
}

void write_outputs(const RiskReport& r, const RunConfig& config, const ContingencyTable& table) {
  const fs::path dir = config.output;
  fs::create_directories(dir);
  auto put = [&](const fs::path& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + (dir / name).string());
  };
  put("report.txt", format_report_text(r, table.schema()));
  put("report.kv", format_report_kv(r));
  put("percell.csv", format_percell_csv(r, table));
  if (r.truth) {
    put("calibration_tau1.csv", format_calibration_csv(r.calibration_tau1));
    put("calibration_tau2.csv", format_calibration_csv(r.calibration_tau2));
  }
  if (r.mcmc) {
    put("diagnostics.csv", format_diagnostics_csv(r.diagnostics));
    if (config.write_checkpoints) {
      fs::create_directories(dir / "checkpoints");
      for (const auto& c : r.checkpoints)
        put(fs::path("checkpoints") / ("chain_" + std::to_string(c.chain) + ".json"), c.to_json());
    }
  }
  put("config.json", config.to_json());
}

RiskReport run(const RunConfig& config) {
  const auto table = load_table(config);
  auto report = estimate(config, table);
  in_stage("cli", [&] {
    write_outputs(report, config, table);
    return 0;
  });
  return report;
}

}  // namespace drisk
