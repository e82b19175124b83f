#pragma once

// End-to-end runs: configuration, estimation and report files.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drisk/design.hpp"
#include "drisk/model.hpp"
#include "drisk/risk.hpp"
#include "drisk/samplers.hpp"
#include "drisk/table.hpp"

namespace drisk {

/// Random-effects family crossed with a design, or a plug-in IPF baseline
/// ("II-IPF"). Labels: "P+O", "NP+I", ..., "II-IPF".
struct ModelKind {
  RandomEffects effects = RandomEffects::Nonparametric;
  DesignKind design = DesignKind::Independence;
  bool ipf_baseline = false;

  std::string label() const;
  static ModelKind parse(std::string_view label);
  bool operator==(const ModelKind&) const = default;
};

struct InputSpec {
  std::string microdata;         ///< one record per row
  std::string counts;            ///< pre-tabulated sample counts
  std::string population;        ///< optional population counts (benchmark mode)
  std::string structural_zeros;  ///< optional pattern file
  std::string labels;            ///< optional label-to-code sidecar
  char delimiter = ',';
};

struct RunConfig {
  InputSpec input;
  KeySchema schema;
  double pi = 0.0;
  ModelKind model;
  EstimationMode mode = EstimationMode::FullBayes;
  Priors priors;
  ChainConfig chains;  ///< chains.seed is the run seed
  std::string resume;  ///< directory of checkpoints to continue from
  std::string output = "drisk-out";
  std::size_t calibration_bins = 10;
  bool write_checkpoints = true;

  void validate() const;
  /// Canonical JSON with every default filled in.
  std::string to_json() const;
  /// 64-bit FNV-1a of the canonical JSON, hex.
  std::string hash() const;

  /// Parses a JSON document. Relative input paths are resolved against
  /// base_dir. `overrides` are dotted-path assignments (e.g.
  /// "chains.burn_in=200"); values parse as JSON, falling back to strings.
  static RunConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {},
                             std::span<const std::string> overrides = {});
  static RunConfig load(const std::filesystem::path& path,
                        std::span<const std::string> overrides = {});
};

/// Source version recorded in reports.
std::string_view source_version();

struct RiskReport {
  ModelKind model;
  EstimationMode mode = EstimationMode::FullBayes;
  Count sample_size = 0;
  std::size_t nonzero_cells = 0;
  std::uint64_t effective_cells = 0;

  StarEstimates star;
  std::optional<GlobalEstimates> full;  ///< absent for plug-in baselines
  bool plug_in = false;

  std::optional<TrueRisks> truth;
  std::vector<CalibrationBin> calibration_tau1;
  std::vector<CalibrationBin> calibration_tau2;
  std::vector<Count> unique_population;  ///< F_k per unique (benchmark mode)

  bool mcmc = false;
  Diagnostics diagnostics;
  double acceptance_rate = 0.0;
  std::size_t aborted_steps = 0;
  double mean_clusters = 0.0;
  std::size_t ipf_iterations = 0;
  std::vector<ChainCheckpoint> checkpoints;

  /// Ordered run metadata, including every default that filled a modelling gap.
  std::vector<std::pair<std::string, std::string>> metadata;

  bool converged() const { return !mcmc || diagnostics.converged; }
};

ContingencyTable load_table(const RunConfig& config);

/// Estimates risks for a table. A population benchmark, when present, is
/// used only for the truth and calibration outputs; estimation sees a
/// population-free copy.
RiskReport estimate(const RunConfig& config, const ContingencyTable& table);

std::string format_report_text(const RiskReport& report, const KeySchema& schema);
std::string format_report_kv(const RiskReport& report);
std::string format_percell_csv(const RiskReport& report, const ContingencyTable& table);
std::string format_calibration_csv(std::span<const CalibrationBin> bins);
std::string format_diagnostics_csv(const Diagnostics& diagnostics);

void write_outputs(const RiskReport& report, const RunConfig& config,
                   const ContingencyTable& table);

/// load_table, estimate and write_outputs. Errors name the failing stage.
RiskReport run(const RunConfig& config);

}  // namespace drisk
