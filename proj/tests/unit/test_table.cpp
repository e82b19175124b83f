#include <doctest.h>

#include <sstream>

#include "drisk/error.hpp"
#include "helpers.hpp"

using namespace drisk;
using testing::schema_of;

TEST_CASE("schema cell counts and mixed-radix encoding") {
  CHECK(schema_of({10, 10, 2, 6, 5, 3, 5}).num_cells() == 90000);
  CHECK(schema_of({2, 12, 11, 20, 4, 2, 4, 5}).num_cells() == 844800);

  const auto s = schema_of({2, 2});
  const std::vector<std::uint32_t> t{1, 1};
  CHECK(s.encode(t) == 3);
  CHECK(s.decode(2) == std::vector<std::uint32_t>{1, 0});

  const auto big = schema_of({3, 4, 5, 7});
  for (CellId k = 0; k < big.num_cells(); ++k) CHECK(big.encode(big.decode(k)) == k);
}

TEST_CASE("schema rejects bad variables") {
  CHECK_THROWS_AS(schema_of({2, 1}), InputError);
  CHECK_THROWS_AS(KeySchema({{"x", 2}, {"x", 3}}), InputError);
  std::vector<KeyVariable> huge;
  for (int i = 0; i < 70; ++i) huge.push_back({"v" + std::to_string(i), 2});
  CHECK_THROWS_AS((void)KeySchema(huge), InputError);
  const auto s = schema_of({2, 3});
  const std::vector<std::uint32_t> bad{0, 3};
  CHECK_THROWS_AS((void)s.encode(bad), InputError);
}

TEST_CASE("microdata ingestion tabulates rows") {
  const auto s = schema_of({2, 2});
  const std::vector<std::vector<std::uint32_t>> rows{{0, 0}, {0, 0}, {1, 1}};
  const auto t = ingest_microdata(rows, s, 0.1);
  CHECK(t.sample_size() == 3);
  REQUIRE(t.nonzero_counts().size() == 2);
  CHECK(t.count(0) == 2);
  CHECK(t.count(3) == 1);
  CHECK(t.count(1) == 0);
  CHECK(sample_uniques(t) == std::vector<CellId>{3});
}

TEST_CASE("microdata errors name the row and variable") {
  const auto s = schema_of({2, 2});
  const std::vector<std::vector<std::uint32_t>> bad_code{{0, 0}, {0, 2}};
  try {
    ingest_microdata(bad_code, s, 0.1);
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("'b'") != std::string::npos);
  }
  const std::vector<std::vector<std::uint32_t>> bad_arity{{0}};
  CHECK_THROWS_AS(ingest_microdata(bad_arity, s, 0.1), InputError);
  CHECK_THROWS_AS(ContingencyTable(s, {}, 1.0), InputError);
  CHECK_THROWS_AS(ContingencyTable(s, {}, 0.0), InputError);
}

TEST_CASE("sample uniques of an empty table") {
  const ContingencyTable t(schema_of({3, 3}), {}, 0.5);
  CHECK(sample_uniques(t).empty());
  CHECK(t.sample_size() == 0);
}

TEST_CASE("sample uniques agree with a full scan") {
  Rng rng(17);
  const auto s = schema_of({4, 5, 3});
  const auto t = testing::random_table(s, 0.1, 0.8, rng);
  std::size_t scan = 0;
  for (CellId k = 0; k < s.num_cells(); ++k) scan += t.count(k) == 1;
  CHECK(sample_uniques(t).size() == scan);
}

TEST_CASE("structural zeros") {
  const auto s = schema_of({2, 3});
  const ContingencyTable t(s, {{0, 2}, {1, 1}}, 0.1);
  const std::vector<CellId> five{5};
  const auto marked = mark_structural_zeros(t, five);
  CHECK(marked.num_effective_cells() == s.num_cells() - 1);
  CHECK(marked.is_structural_zero(5));
  CHECK(marked.active_cells().size() == 5);

  const std::vector<CellId> one{1};
  CHECK_THROWS_AS(mark_structural_zeros(t, one), InputError);

  // A sample unique can never be a structural zero.
  for (auto u : sample_uniques(marked)) CHECK_FALSE(marked.is_structural_zero(u));
}

TEST_CASE("population benchmark invariants") {
  const auto s = schema_of({2, 2});
  CHECK_THROWS_AS(ContingencyTable(s, {{0, 3}}, 0.1, {}, std::vector<std::pair<CellId, Count>>{{0, 2}}),
                  InputError);
  CHECK_THROWS_AS(ContingencyTable(s, {}, 0.1, {1}, std::vector<std::pair<CellId, Count>>{{1, 2}}),
                  InputError);
  const ContingencyTable t(s, {{0, 1}}, 0.1, {}, std::vector<std::pair<CellId, Count>>{{0, 4}});
  CHECK(t.has_population());
  CHECK(t.population_count(0) == 4);
  CHECK_FALSE(t.without_population().has_population());
}

TEST_CASE("counts survive a write and read round trip") {
  Rng rng(5);
  const auto s = schema_of({3, 4, 2});
  const auto t = testing::random_table(s, 0.2, 1.5, rng);
  std::stringstream io;
  write_counts(io, t);
  const auto back = read_counts(io, s, 0.2);
  CHECK(back.sample_size() == t.sample_size());
  CHECK(std::equal(back.nonzero_counts().begin(), back.nonzero_counts().end(),
                   t.nonzero_counts().begin(), t.nonzero_counts().end()));
}

TEST_CASE("delimited microdata with labels and extra columns") {
  const KeySchema s({{"sex", 2}, {"age", 3}});
  std::istringstream labels("variable,label,code\nsex,F,0\nsex,M,1\n");
  const auto map = read_label_map(labels);
  std::istringstream in("id\tage\tsex\n1\t2\tM\n2\t2\tM\n3\t0\tF\n");
  const auto t = read_microdata(in, s, 0.25, '\t', map);
  CHECK(t.sample_size() == 3);
  CHECK(t.count(s.encode(std::vector<std::uint32_t>{1, 2})) == 2);
  CHECK(t.count(s.encode(std::vector<std::uint32_t>{0, 0})) == 1);

  std::istringstream bad("sex,age\nM,7\n");
  CHECK_THROWS_AS(read_microdata(bad, s, 0.25, ',', map), InputError);
}

TEST_CASE("structural-zero patterns expand wildcards") {
  const KeySchema s({{"a", 2}, {"b", 3}, {"c", 2}});
  std::istringstream in("a,b,c\n1,*,0\n0,2,*\n");
  const auto cells = read_structural_zero_patterns(in, s);
  CHECK(cells.size() == 5);
  CHECK(std::is_sorted(cells.begin(), cells.end()));
}

TEST_CASE("pre-tabulated counts with a population column") {
  const KeySchema s({{"a", 2}, {"b", 2}});
  std::istringstream in("a,b,count,pop_count\n0,0,1,1\n1,1,2,9\n0,1,0,4\n");
  const auto t = read_counts(in, s, 0.1);
  CHECK(t.has_population());
  CHECK(t.sample_size() == 3);
  CHECK(t.population_count(1) == 4);
}
