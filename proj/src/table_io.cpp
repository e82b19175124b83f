#include <algorithm>
#include <istream>
#include <ostream>

#include "drisk/error.hpp"
#include "drisk/table.hpp"
#include "text.hpp"

namespace drisk {

namespace {

struct ColumnMap {
  std::vector<std::size_t> var_columns;  // per schema variable
  std::optional<std::size_t> count_column;
  std::optional<std::size_t> pop_column;
  std::size_t width = 0;
};

ColumnMap map_header(const std::vector<std::string>& header, const KeySchema& schema,
                     bool want_counts) {
  ColumnMap map;
  map.width = header.size();
  map.var_columns.assign(schema.num_variables(), header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (auto j = schema.index_of(header[c])) {
      map.var_columns[*j] = c;
    } else if (want_counts && header[c] == "count") {
      map.count_column = c;
    } else if (want_counts && header[c] == "pop_count") {
      map.pop_column = c;
    }
  }
  for (std::size_t j = 0; j < schema.num_variables(); ++j)
    if (map.var_columns[j] == header.size())
      throw InputError("header lacks key variable '" + schema.variable(j).name + "'");
  if (want_counts && !map.count_column) throw InputError("header lacks a 'count' column");
  return map;
}

std::uint32_t parse_code(const std::string& field, const KeyVariable& var, const LabelMap& labels,
                         std::size_t line_no) {
  if (auto it = labels.find(var.name); it != labels.end()) {
    auto code = it->second.find(field);
    if (code == it->second.end())
      throw InputError("line " + std::to_string(line_no) + ": unknown label '" + field +
                       "' for variable '" + var.name + "'");
    return code->second;
  }
  const auto v = text::parse_u64(field, "category code", line_no);
  if (v >= var.cardinality)
    throw InputError("line " + std::to_string(line_no) + ": code " + std::to_string(v) +
                     " out of range for variable '" + var.name + "'");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint32_t> parse_tuple(const std::vector<std::string>& fields, const ColumnMap& map,
                                       const KeySchema& schema, const LabelMap& labels,
                                       std::size_t line_no) {
  if (fields.size() != map.width)
    throw InputError("line " + std::to_string(line_no) + ": expected " +
                     std::to_string(map.width) + " fields, got " + std::to_string(fields.size()));
  std::vector<std::uint32_t> codes(schema.num_variables());
  for (std::size_t j = 0; j < codes.size(); ++j)
    codes[j] = parse_code(fields[map.var_columns[j]], schema.variable(j), labels, line_no);
  return codes;
}

}  // namespace

LabelMap read_label_map(std::istream& in, char delimiter) {
  LabelMap out;
  std::string line;
  std::size_t line_no = 0;
  while (text::next_line(in, line, line_no)) {
    auto f = text::split(line, delimiter);
    if (f.size() != 3) throw InputError("label map line " + std::to_string(line_no) + ": need 3 fields");
    if (line_no == 1 && f[0] == "variable" && f[1] == "label") continue;
    const auto code = text::parse_u64(f[2], "code", line_no);
    out[f[0]][f[1]] = static_cast<std::uint32_t>(code);
  }
  return out;
}

ContingencyTable read_microdata(std::istream& in, const KeySchema& schema, double pi,
                                char delimiter, const LabelMap& labels) {
  std::string line;
  std::size_t line_no = 0;
  if (!text::next_line(in, line, line_no)) throw InputError("microdata input is empty");
  const auto map = map_header(text::split(line, delimiter), schema, false);
  std::vector<std::pair<CellId, Count>> counts;
  while (text::next_line(in, line, line_no)) {
    const auto codes = parse_tuple(text::split(line, delimiter), map, schema, labels, line_no);
    counts.emplace_back(schema.encode(codes), 1);
  }
  return ContingencyTable(schema, std::move(counts), pi);
}

ContingencyTable read_counts(std::istream& in, const KeySchema& schema, double pi,
                             char delimiter, const LabelMap& labels) {
  std::string line;
  std::size_t line_no = 0;
  if (!text::next_line(in, line, line_no)) throw InputError("count input is empty");
  const auto map = map_header(text::split(line, delimiter), schema, true);
  std::vector<std::pair<CellId, Count>> counts;
  std::optional<std::vector<std::pair<CellId, Count>>> pop;
  if (map.pop_column) pop.emplace();
  while (text::next_line(in, line, line_no)) {
    const auto fields = text::split(line, delimiter);
    const auto cell = schema.encode(parse_tuple(fields, map, schema, labels, line_no));
    counts.emplace_back(cell, text::parse_u64(fields[*map.count_column], "count", line_no));
    if (pop) pop->emplace_back(cell, text::parse_u64(fields[*map.pop_column], "pop_count", line_no));
  }
  return ContingencyTable(schema, std::move(counts), pi, {}, std::move(pop));
}

void write_counts(std::ostream& out, const ContingencyTable& table, char delimiter) {
  const auto& schema = table.schema();
  for (const auto& v : schema.variables()) out << v.name << delimiter;
  out << "count";
  const bool with_pop = table.has_population();
  if (with_pop) out << delimiter << "pop_count";
  out << '\n';

  auto emit = [&](CellId cell, Count f, Count pop) {
    for (auto code : schema.decode(cell)) out << code << delimiter;
    out << f;
    if (with_pop) out << delimiter << pop;
    out << '\n';
  };
  if (!with_pop) {
    for (const auto& [cell, f] : table.nonzero_counts()) emit(cell, f, 0);
    return;
  }
  // Union of sample and population support.
  auto s = table.nonzero_counts();
  auto p = table.population_counts();
  std::size_t i = 0, k = 0;
  while (i < s.size() || k < p.size()) {
    if (k == p.size() || (i < s.size() && s[i].first < p[k].first)) {
      emit(s[i].first, s[i].second, 0);
      ++i;
    } else if (i == s.size() || p[k].first < s[i].first) {
      emit(p[k].first, 0, p[k].second);
      ++k;
    } else {
      emit(s[i].first, s[i].second, p[k].second);
      ++i;
      ++k;
    }
  }
}

std::vector<CellId> read_structural_zero_patterns(std::istream& in, const KeySchema& schema,
                                                  char delimiter, const LabelMap& labels) {
  std::string line;
  std::size_t line_no = 0;
  if (!text::next_line(in, line, line_no)) return {};
  const auto map = map_header(text::split(line, delimiter), schema, false);
  const auto nvar = schema.num_variables();
  std::vector<CellId> cells;
  while (text::next_line(in, line, line_no)) {
    const auto fields = text::split(line, delimiter);
    if (fields.size() != map.width)
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(map.width) + " fields");
    // Per variable: either a fixed code or every code.
    std::vector<std::vector<std::uint32_t>> choices(nvar);
    for (std::size_t j = 0; j < nvar; ++j) {
      const auto& field = fields[map.var_columns[j]];
      if (field == "*") {
        for (std::uint32_t c = 0; c < schema.variable(j).cardinality; ++c) choices[j].push_back(c);
      } else {
        choices[j].push_back(parse_code(field, schema.variable(j), labels, line_no));
      }
    }
    std::vector<std::size_t> pos(nvar, 0);
    std::vector<std::uint32_t> codes(nvar);
    while (true) {
      for (std::size_t j = 0; j < nvar; ++j) codes[j] = choices[j][pos[j]];
      cells.push_back(schema.encode(codes));
      std::size_t j = nvar;
      while (j > 0 && ++pos[j - 1] == choices[j - 1].size()) pos[--j] = 0;
      if (j == 0) break;
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

}  // namespace drisk
