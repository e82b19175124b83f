#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drisk/table.hpp"

namespace drisk {

enum class DesignKind { OverallMean, Independence, AllTwoWay };

std::string_view to_string(DesignKind kind);
DesignKind parse_design_kind(std::string_view s);

/// Fixed-effects structure over a schema. Treatment coding with category 0 as
/// reference, no intercept; two-way columns are products of main-effect
/// dummies.
class DesignSpec {
 public:
  DesignSpec(DesignKind kind, KeySchema schema);

  DesignKind kind() const noexcept { return kind_; }
  const KeySchema& schema() const noexcept { return schema_; }
  /// Number of fixed-effect columns q.
  std::size_t num_columns() const noexcept { return num_columns_; }

  /// Column indices of the unit entries of w for a category tuple, ascending.
  void row(std::span<const std::uint32_t> codes, std::vector<std::uint32_t>& out) const;

  /// Human-readable label for a column, e.g. "age=3" or "sex=1:age=3".
  std::string column_label(std::size_t column) const;

  /// Coding description recorded in run metadata.
  static constexpr std::string_view coding() {
    return "treatment coding, reference category 0, no intercept; two-way columns are "
           "products of main-effect dummies";
  }

 private:
  DesignKind kind_;
  KeySchema schema_;
  std::vector<std::uint32_t> main_offset_;
  std::vector<std::vector<std::uint32_t>> pair_offset_;  // [j][l] for j < l
  std::size_t num_columns_ = 0;
};

/// Closed-form count of design columns, checked for overflow.
std::uint64_t design_columns(DesignKind kind, std::span<const std::uint32_t> cardinalities);

/// Sparse 0/1 design rows for the active (non-structural) cells of a table,
/// held in compressed-row form.
class DesignMatrix {
 public:
  DesignMatrix(DesignSpec spec, std::vector<CellId> cells);

  const DesignSpec& spec() const noexcept { return spec_; }
  std::size_t num_columns() const noexcept { return spec_.num_columns(); }
  std::size_t num_rows() const noexcept { return cells_.size(); }
  std::span<const CellId> cells() const noexcept { return cells_; }

  /// Columns with a unit entry in row i.
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {columns_.data() + row_start_[i], columns_.data() + row_start_[i + 1]};
  }

  /// Row index of a cell, or num_rows() when the cell is not active.
  std::size_t row_of(CellId cell) const;

 private:
  DesignSpec spec_;
  std::vector<CellId> cells_;
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> columns_;
};

inline constexpr std::uint64_t kDefaultMaxColumns = 20000;

DesignMatrix build_design(const DesignSpec& spec, const ContingencyTable& table,
                          std::uint64_t max_columns = kDefaultMaxColumns,
                          std::uint64_t dense_threshold = kDefaultDenseThreshold);

/// xi_i = exp(w_i' beta) for every row.
std::vector<double> linear_predictor(const DesignMatrix& design, std::span<const double> beta);
void linear_predictor(const DesignMatrix& design, std::span<const double> beta,
                      std::span<double> out);

}  // namespace drisk
