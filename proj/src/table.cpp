#include "drisk/table.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "drisk/error.hpp"

namespace drisk {

KeySchema::KeySchema(std::vector<KeyVariable> variables) : variables_(std::move(variables)) {
  if (variables_.empty()) throw InputError("key schema has no variables");
  std::set<std::string> seen;
  for (const auto& v : variables_) {
    if (v.cardinality < 2)
      throw InputError("variable '" + v.name + "' has cardinality " +
                       std::to_string(v.cardinality) + " (need >= 2)");
    if (!seen.insert(v.name).second) throw InputError("duplicate variable name '" + v.name + "'");
  }
  strides_.assign(variables_.size(), 1);
  num_cells_ = 1;
  for (std::size_t j = variables_.size(); j-- > 0;) {
    strides_[j] = num_cells_;
    const std::uint64_t c = variables_[j].cardinality;
    if (num_cells_ > std::numeric_limits<std::uint64_t>::max() / c)
      throw InputError("number of cells overflows 64 bits");
    num_cells_ *= c;
  }
}

std::vector<std::uint32_t> KeySchema::cardinalities() const {
  std::vector<std::uint32_t> out;
  out.reserve(variables_.size());
  for (const auto& v : variables_) out.push_back(v.cardinality);
  return out;
}

std::optional<std::size_t> KeySchema::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].name == name) return j;
  return std::nullopt;
}

CellId KeySchema::encode(std::span<const std::uint32_t> codes) const {
  if (codes.size() != variables_.size())
    throw InputError("tuple has " + std::to_string(codes.size()) + " codes, schema has " +
                     std::to_string(variables_.size()) + " variables");
  CellId cell = 0;
  for (std::size_t j = 0; j < codes.size(); ++j) {
    if (codes[j] >= variables_[j].cardinality)
      throw InputError("code " + std::to_string(codes[j]) + " out of range for variable '" +
                       variables_[j].name + "'");
    cell += codes[j] * strides_[j];
  }
  return cell;
}

void KeySchema::decode(CellId cell, std::span<std::uint32_t> out) const {
  if (cell >= num_cells_) throw InputError("cell " + std::to_string(cell) + " out of range");
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    out[j] = static_cast<std::uint32_t>(cell / strides_[j]);
    cell %= strides_[j];
  }
}

std::vector<std::uint32_t> KeySchema::decode(CellId cell) const {
  std::vector<std::uint32_t> out(variables_.size());
  decode(cell, out);
  return out;
}

bool KeySchema::operator==(const KeySchema& other) const {
  if (variables_.size() != other.variables_.size()) return false;
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].name != other.variables_[j].name ||
        variables_[j].cardinality != other.variables_[j].cardinality)
      return false;
  return true;
}

namespace {

std::vector<std::pair<CellId, Count>> normalize_counts(std::vector<std::pair<CellId, Count>> in,
                                                       std::uint64_t num_cells) {
  std::sort(in.begin(), in.end());
  std::vector<std::pair<CellId, Count>> out;
  out.reserve(in.size());
  for (const auto& [cell, n] : in) {
    if (cell >= num_cells) throw InputError("cell " + std::to_string(cell) + " out of range");
    if (n == 0) continue;
    if (!out.empty() && out.back().first == cell)
      out.back().second += n;
    else
      out.emplace_back(cell, n);
  }
  return out;
}

Count lookup(std::span<const std::pair<CellId, Count>> counts, CellId cell) {
  auto it = std::lower_bound(counts.begin(), counts.end(), cell,
                             [](const auto& p, CellId c) { return p.first < c; });
  return (it != counts.end() && it->first == cell) ? it->second : 0;
}

}  // namespace

ContingencyTable::ContingencyTable(KeySchema schema, std::vector<std::pair<CellId, Count>> counts,
                                   double pi, std::vector<CellId> structural_zeros,
                                   std::optional<std::vector<std::pair<CellId, Count>>> population)
    : schema_(std::move(schema)), pi_(pi) {
  if (!(pi > 0.0 && pi < 1.0))
    throw InputError("sampling fraction must lie in (0,1), got " + std::to_string(pi));
  const auto k = schema_.num_cells();
  counts_ = normalize_counts(std::move(counts), k);
  for (const auto& [cell, n] : counts_) sample_size_ += n;

  std::sort(structural_zeros.begin(), structural_zeros.end());
  structural_zeros.erase(std::unique(structural_zeros.begin(), structural_zeros.end()),
                         structural_zeros.end());
  for (CellId z : structural_zeros) {
    if (z >= k) throw InputError("structural zero " + std::to_string(z) + " out of range");
    if (lookup(counts_, z) > 0)
      throw InputError("cell " + std::to_string(z) +
                       " is marked as a structural zero but has a positive sample count");
  }
  structural_zeros_ = std::move(structural_zeros);

  if (population) {
    auto pop = normalize_counts(std::move(*population), k);
    for (const auto& [cell, f] : counts_)
      if (lookup(pop, cell) < f)
        throw InputError("population count below sample count in cell " + std::to_string(cell));
    for (CellId z : structural_zeros_)
      if (lookup(pop, z) > 0)
        throw InputError("population count positive on structural zero " + std::to_string(z));
    population_ = std::move(pop);
  }
}

Count ContingencyTable::count(CellId cell) const { return lookup(counts_, cell); }

bool ContingencyTable::is_structural_zero(CellId cell) const {
  return std::binary_search(structural_zeros_.begin(), structural_zeros_.end(), cell);
}

std::span<const std::pair<CellId, Count>> ContingencyTable::population_counts() const {
  if (!population_) return {};
  return *population_;
}

Count ContingencyTable::population_count(CellId cell) const {
  if (!population_) throw InputError("table has no population counts");
  return lookup(*population_, cell);
}

ContingencyTable ContingencyTable::without_population() const {
  ContingencyTable copy = *this;
  copy.population_.reset();
  return copy;
}

std::vector<CellId> ContingencyTable::active_cells(std::uint64_t dense_threshold) const {
  const auto k = num_cells();
  if (k > dense_threshold)
    throw InputError("table has " + std::to_string(k) + " cells, above the dense threshold " +
                     std::to_string(dense_threshold));
  std::vector<CellId> out;
  out.reserve(num_effective_cells());
  auto z = structural_zeros_.begin();
  for (CellId cell = 0; cell < k; ++cell) {
    if (z != structural_zeros_.end() && *z == cell) {
      ++z;
      continue;
    }
    out.push_back(cell);
  }
  return out;
}

ContingencyTable ingest_microdata(std::span<const std::vector<std::uint32_t>> rows,
                                  const KeySchema& schema, double pi) {
  std::vector<std::pair<CellId, Count>> counts;
  counts.reserve(rows.size());
  const auto nvar = schema.num_variables();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != nvar)
      throw InputError("row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                       " values, expected " + std::to_string(nvar));
    for (std::size_t j = 0; j < nvar; ++j)
      if (row[j] >= schema.variable(j).cardinality)
        throw InputError("row " + std::to_string(r + 1) + ": code " + std::to_string(row[j]) +
                         " out of range for variable '" + schema.variable(j).name + "'");
    counts.emplace_back(schema.encode(row), 1);
  }
  return ContingencyTable(schema, std::move(counts), pi);
}

std::vector<CellId> sample_uniques(const ContingencyTable& table) {
  std::vector<CellId> out;
  for (const auto& [cell, n] : table.nonzero_counts())
    if (n == 1) out.push_back(cell);
  return out;
}

ContingencyTable mark_structural_zeros(const ContingencyTable& table,
                                       std::span<const CellId> cells) {
  std::vector<CellId> zeros(table.structural_zeros().begin(), table.structural_zeros().end());
  zeros.insert(zeros.end(), cells.begin(), cells.end());
  std::vector<std::pair<CellId, Count>> counts(table.nonzero_counts().begin(),
                                               table.nonzero_counts().end());
  std::optional<std::vector<std::pair<CellId, Count>>> pop;
  if (table.has_population())
    pop.emplace(table.population_counts().begin(), table.population_counts().end());
  return ContingencyTable(table.schema(), std::move(counts), table.sampling_fraction(),
                          std::move(zeros), std::move(pop));
}

}  // namespace drisk
