#pragma once

#include <cmath>
#include <vector>

#include "drisk/design.hpp"
#include "drisk/model.hpp"
#include "drisk/random.hpp"
#include "drisk/table.hpp"

namespace testing {

inline drisk::KeySchema schema_of(std::initializer_list<std::uint32_t> cards) {
  std::vector<drisk::KeyVariable> vars;
  char name = 'a';
  for (auto c : cards) vars.push_back({std::string(1, name++), c});
  return drisk::KeySchema(std::move(vars));
}

// Random counts over every cell of a schema.
inline drisk::ContingencyTable random_table(const drisk::KeySchema& schema, double pi,
                                            double mean, drisk::Rng& rng) {
  std::vector<std::pair<drisk::CellId, drisk::Count>> counts;
  for (drisk::CellId k = 0; k < schema.num_cells(); ++k)
    counts.emplace_back(k, drisk::draw_poisson(rng, mean));
  return drisk::ContingencyTable(schema, std::move(counts), pi);
}

inline drisk::PoissonLogLinear make_model(const drisk::ContingencyTable& t, drisk::DesignKind kind) {
  return drisk::PoissonLogLinear(t, drisk::build_design(drisk::DesignSpec(kind, t.schema()), t));
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace testing
