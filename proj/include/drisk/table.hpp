#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drisk {

using CellId = std::uint64_t;
using Count = std::uint64_t;

/// Tables larger than this are never materialized densely.
inline constexpr std::uint64_t kDefaultDenseThreshold = std::uint64_t{1} << 20;

struct KeyVariable {
  std::string name;
  std::uint32_t cardinality = 0;
};

/// Ordered key variables and the mixed-radix bijection between category
/// tuples and flat cell ids. The last variable varies fastest.
class KeySchema {
 public:
  KeySchema() = default;
  explicit KeySchema(std::vector<KeyVariable> variables);

  std::size_t num_variables() const noexcept { return variables_.size(); }
  const KeyVariable& variable(std::size_t j) const { return variables_.at(j); }
  std::span<const KeyVariable> variables() const noexcept { return variables_; }
  std::vector<std::uint32_t> cardinalities() const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Total number of cells K.
  std::uint64_t num_cells() const noexcept { return num_cells_; }

  CellId encode(std::span<const std::uint32_t> codes) const;
  std::vector<std::uint32_t> decode(CellId cell) const;
  void decode(CellId cell, std::span<std::uint32_t> out) const;

  bool operator==(const KeySchema& other) const;

 private:
  std::vector<KeyVariable> variables_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t num_cells_ = 1;
};

/// Sparse sample counts over a key schema, with the sampling fraction and an
/// optional population benchmark. Immutable once built.
class ContingencyTable {
 public:
  ContingencyTable() = default;

  /// Builds a table from (cell, count) pairs. Duplicate cells are summed and
  /// zero counts dropped.
  ContingencyTable(KeySchema schema, std::vector<std::pair<CellId, Count>> counts, double pi,
                   std::vector<CellId> structural_zeros = {},
                   std::optional<std::vector<std::pair<CellId, Count>>> population = std::nullopt);

  const KeySchema& schema() const noexcept { return schema_; }
  double sampling_fraction() const noexcept { return pi_; }
  std::uint64_t num_cells() const noexcept { return schema_.num_cells(); }
  /// K minus the number of structural zeros.
  std::uint64_t num_effective_cells() const noexcept {
    return schema_.num_cells() - structural_zeros_.size();
  }
  Count sample_size() const noexcept { return sample_size_; }

  /// Nonzero sample counts sorted by cell.
  std::span<const std::pair<CellId, Count>> nonzero_counts() const noexcept { return counts_; }
  Count count(CellId cell) const;

  std::span<const CellId> structural_zeros() const noexcept { return structural_zeros_; }
  bool is_structural_zero(CellId cell) const;

  bool has_population() const noexcept { return population_.has_value(); }
  /// Nonzero population counts sorted by cell. Empty without a benchmark.
  std::span<const std::pair<CellId, Count>> population_counts() const;
  Count population_count(CellId cell) const;
  /// Copy with the population benchmark removed.
  ContingencyTable without_population() const;

  /// All non-structural cells, ascending. Throws when K exceeds the threshold.
  std::vector<CellId> active_cells(std::uint64_t dense_threshold = kDefaultDenseThreshold) const;

 private:
  KeySchema schema_;
  double pi_ = 0.0;
  std::vector<std::pair<CellId, Count>> counts_;
  std::vector<CellId> structural_zeros_;
  std::optional<std::vector<std::pair<CellId, Count>>> population_;
  Count sample_size_ = 0;
};

ContingencyTable ingest_microdata(std::span<const std::vector<std::uint32_t>> rows,
                                  const KeySchema& schema, double pi);

/// Cells with f = 1 that are not structural zeros, ascending.
std::vector<CellId> sample_uniques(const ContingencyTable& table);

ContingencyTable mark_structural_zeros(const ContingencyTable& table,
                                       std::span<const CellId> cells);

// ---------------------------------------------------------------------------
// Delimited text I/O

/// Maps external category labels to dense codes, per variable name.
using LabelMap = std::map<std::string, std::map<std::string, std::uint32_t>>;

/// Reads a sidecar with lines `variable<delim>label<delim>code` (header line
/// `variable,label,code` optional).
LabelMap read_label_map(std::istream& in, char delimiter = ',');

/// Microdata: header of variable names, one record per row. Columns are
/// matched to the schema by name; extra columns are ignored.
ContingencyTable read_microdata(std::istream& in, const KeySchema& schema, double pi,
                                char delimiter = ',', const LabelMap& labels = {});

/// Pre-tabulated counts: columns <var1..varJ, count> and optional <pop_count>.
ContingencyTable read_counts(std::istream& in, const KeySchema& schema, double pi,
                             char delimiter = ',', const LabelMap& labels = {});

void write_counts(std::ostream& out, const ContingencyTable& table, char delimiter = ',');

/// Structural-zero patterns: a header of variable names then one pattern per
/// row; `*` matches every category. Returns the expanded cell set, ascending.
std::vector<CellId> read_structural_zero_patterns(std::istream& in, const KeySchema& schema,
                                                  char delimiter = ',',
                                                  const LabelMap& labels = {});

}  // namespace drisk
