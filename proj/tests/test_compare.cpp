#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dipps/compare.hpp"
#include "helpers.hpp"

using namespace dipps;

namespace {

FeatureSet fs(std::vector<double> centers, std::string name = "s",
              double width = 0.25, double offset = 0.0) {
  FeatureSet f;
  f.centers = std::move(centers);
  f.source = std::move(name);
  f.grid_width = width;
  f.grid_offset = offset;
  return f;
}

FeatureSet random_fs(std::mt19937& rng, std::string name) {
  std::vector<double> centers;
  for (int i = 0; i < 40; ++i)
    if (rng() & 1u) centers.push_back(1000.0 + 0.25 * i);
  return fs(std::move(centers), std::move(name));
}

}  // namespace

TEST_CASE("jaccard distance on hand cases") {
  const auto s = fs({1000.0, 1000.25, 1001.0});
  REQUIRE(jaccard_distance(s, s) == 0.0);

  REQUIRE(jaccard_distance(fs({1000.0}), fs({1002.5})) == 1.0);

  // {1, 2} vs {2, 3}: intersection 1, union 3
  const double d = jaccard_distance(fs({1.0, 2.0}), fs({2.0, 3.0}));
  REQUIRE(d == 1.0 - 1.0 / 3.0);

  REQUIRE(jaccard_distance(fs({}), fs({})) == 0.0);
  REQUIRE(jaccard_distance(fs({}), fs({1000.0})) == 1.0);
}

TEST_CASE("feature sets from different grids cannot be compared") {
  REQUIRE_THROWS_AS(jaccard_distance(fs({1000.0}), fs({1000.0}, "t", 0.5)),
                    ContractViolation);
  REQUIRE_THROWS_AS(
      jaccard_distance(fs({1000.0}), fs({1000.125}, "t", 0.25, 0.125)),
      ContractViolation);
}

TEST_CASE("jaccard distance satisfies the metric laws") {
  std::mt19937 rng(83);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_fs(rng, "a");
    const auto b = random_fs(rng, "b");
    const auto c = random_fs(rng, "c");
    const double ab = jaccard_distance(a, b);
    const double bc = jaccard_distance(b, c);
    const double ac = jaccard_distance(a, c);
    REQUIRE(jaccard_distance(a, a) == 0.0);
    REQUIRE(ab == jaccard_distance(b, a));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 1.0);
    REQUIRE(ac <= ab + bc + 1e-12);
  }
}

TEST_CASE("identical sets produce an all-zero matrix") {
  const auto s = fs({1000.0, 1001.0});
  const auto m = pairwise_jaccard(std::vector<FeatureSet>{s, s, s});
  REQUIRE(m.labels.size() == 3);
  for (const auto& row : m.values)
    for (double v : row) REQUIRE(v == 0.0);
}

TEST_CASE("the pairwise matrix matches per-pair recomputation") {
  std::mt19937 rng(89);
  std::vector<FeatureSet> sets;
  for (int i = 0; i < 9; ++i) sets.push_back(random_fs(rng, "d" + std::to_string(i)));
  const auto m = pairwise_jaccard(sets);
  REQUIRE(m.labels.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    REQUIRE(m.labels[i] == sets[i].source);
    REQUIRE(m.values[i][i] == 0.0);
    for (std::size_t j = 0; j < 9; ++j) {
      REQUIRE(m.values[i][j] == m.values[j][i]);
      REQUIRE(m.values[i][j] == jaccard_distance(sets[i], sets[j]));
    }
  }
}

TEST_CASE("fewer than two sets is a contract violation") {
  REQUIRE_THROWS_AS(pairwise_jaccard(std::vector<FeatureSet>{fs({1.0})}),
                    ContractViolation);
  REQUIRE_THROWS_AS(pairwise_jaccard(std::vector<FeatureSet>{}), ContractViolation);
}
