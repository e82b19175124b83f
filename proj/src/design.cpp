#include "drisk/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drisk/error.hpp"

namespace drisk {

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::OverallMean: return "O";
    case DesignKind::Independence: return "I";
    case DesignKind::AllTwoWay: return "II";
  }
  return "?";
}

DesignKind parse_design_kind(std::string_view s) {
  if (s == "O") return DesignKind::OverallMean;
  if (s == "I") return DesignKind::Independence;
  if (s == "II") return DesignKind::AllTwoWay;
  throw InputError("unknown design '" + std::string(s) + "' (expected O, I or II)");
}

std::uint64_t design_columns(DesignKind kind, std::span<const std::uint32_t> cardinalities) {
  if (kind == DesignKind::OverallMean) return 0;
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t q = 0;
  for (auto c : cardinalities) q += c - 1;
  if (kind == DesignKind::AllTwoWay) {
    for (std::size_t j = 0; j < cardinalities.size(); ++j)
      for (std::size_t l = j + 1; l < cardinalities.size(); ++l) {
        const std::uint64_t a = cardinalities[j] - 1, b = cardinalities[l] - 1;
        if (b != 0 && a > kMax / b) throw InputError("design column count overflows");
        if (q > kMax - a * b) throw InputError("design column count overflows");
        q += a * b;
      }
  }
  return q;
}

DesignSpec::DesignSpec(DesignKind kind, KeySchema schema)
    : kind_(kind), schema_(std::move(schema)) {
  const auto cards = schema_.cardinalities();
  const auto q = design_columns(kind_, cards);
  if (q > std::numeric_limits<std::uint32_t>::max())
    throw InputError("design has " + std::to_string(q) + " columns");
  num_columns_ = static_cast<std::size_t>(q);
  if (kind_ == DesignKind::OverallMean) return;

  std::uint32_t offset = 0;
  main_offset_.resize(cards.size());
  for (std::size_t j = 0; j < cards.size(); ++j) {
    main_offset_[j] = offset;
    offset += cards[j] - 1;
  }
  if (kind_ == DesignKind::AllTwoWay) {
    pair_offset_.assign(cards.size(), std::vector<std::uint32_t>(cards.size(), 0));
    for (std::size_t j = 0; j < cards.size(); ++j)
      for (std::size_t l = j + 1; l < cards.size(); ++l) {
        pair_offset_[j][l] = offset;
        offset += (cards[j] - 1) * (cards[l] - 1);
      }
  }
}

void DesignSpec::row(std::span<const std::uint32_t> codes, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (kind_ == DesignKind::OverallMean) return;
  const auto nvar = codes.size();
  for (std::size_t j = 0; j < nvar; ++j)
    if (codes[j] > 0) out.push_back(main_offset_[j] + codes[j] - 1);
  if (kind_ != DesignKind::AllTwoWay) return;
  for (std::size_t j = 0; j < nvar; ++j) {
    if (codes[j] == 0) continue;
    for (std::size_t l = j + 1; l < nvar; ++l) {
      if (codes[l] == 0) continue;
      const auto width = schema_.variable(l).cardinality - 1;
      out.push_back(pair_offset_[j][l] + (codes[j] - 1) * width + (codes[l] - 1));
    }
  }
}

std::string DesignSpec::column_label(std::size_t column) const {
  if (column >= num_columns_) throw InputError("column out of range");
  const auto nvar = schema_.num_variables();
  for (std::size_t j = nvar; j-- > 0;) {
    if (column >= main_offset_[j] && column < main_offset_[j] + schema_.variable(j).cardinality - 1)
      return schema_.variable(j).name + "=" + std::to_string(column - main_offset_[j] + 1);
  }
  for (std::size_t j = 0; j < nvar; ++j)
    for (std::size_t l = j + 1; l < nvar; ++l) {
      const std::size_t width = schema_.variable(l).cardinality - 1;
      const std::size_t size = (schema_.variable(j).cardinality - 1) * width;
      if (column >= pair_offset_[j][l] && column < pair_offset_[j][l] + size) {
        const auto local = column - pair_offset_[j][l];
        return schema_.variable(j).name + "=" + std::to_string(local / width + 1) + ":" +
               schema_.variable(l).name + "=" + std::to_string(local % width + 1);
      }
    }
  return "?";
}

DesignMatrix::DesignMatrix(DesignSpec spec, std::vector<CellId> cells)
    : spec_(std::move(spec)), cells_(std::move(cells)) {
  if (!std::is_sorted(cells_.begin(), cells_.end()))
    throw InputError("design cells must be ascending");
  row_start_.reserve(cells_.size() + 1);
  row_start_.push_back(0);
  std::vector<std::uint32_t> codes(spec_.schema().num_variables());
  std::vector<std::uint32_t> row;
  for (CellId cell : cells_) {
    spec_.schema().decode(cell, codes);
    spec_.row(codes, row);
    columns_.insert(columns_.end(), row.begin(), row.end());
    row_start_.push_back(columns_.size());
  }
}

std::size_t DesignMatrix::row_of(CellId cell) const {
  auto it = std::lower_bound(cells_.begin(), cells_.end(), cell);
  if (it == cells_.end() || *it != cell) return cells_.size();
  return static_cast<std::size_t>(it - cells_.begin());
}

DesignMatrix build_design(const DesignSpec& spec, const ContingencyTable& table,
                          std::uint64_t max_columns, std::uint64_t dense_threshold) {
  if (!(spec.schema() == table.schema()))
    throw InputError("design schema does not match table schema");
  if (spec.num_columns() > max_columns)
    throw InputError("design has q = " + std::to_string(spec.num_columns()) +
                     " columns, above the maximum " + std::to_string(max_columns));
  return DesignMatrix(spec, table.active_cells(dense_threshold));
}

void linear_predictor(const DesignMatrix& design, std::span<const double> beta,
                      std::span<double> out) {
  if (beta.size() != design.num_columns())
    throw InputError("beta has " + std::to_string(beta.size()) + " entries, design has " +
                     std::to_string(design.num_columns()) + " columns");
  for (std::size_t i = 0; i < design.num_rows(); ++i) {
    double eta = 0.0;
    for (auto col : design.row(i)) eta += beta[col];
    const double xi = std::exp(eta);
    if (!std::isfinite(xi) || xi <= 0.0)
      throw Error("linear predictor not finite at cell " + std::to_string(design.cells()[i]));
    out[i] = xi;
  }
}

std::vector<double> linear_predictor(const DesignMatrix& design, std::span<const double> beta) {
  std::vector<double> out(design.num_rows());
  linear_predictor(design, beta, out);
  return out;
}

}  // namespace drisk
