#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <numeric>
#include <random>

#include "hps/hierarchy.hpp"
#include "test_support.hpp"

using namespace hps;
using hps_test::rat;

namespace {

std::shared_ptr<const Hierarchy> make_hierarchy(const HPSSpec& spec) {
  auto levels = std::make_shared<const LevelSet>(build_levels(spec));
  auto star = std::make_shared<const StarSystem>(star_system(spec, levels));
  return std::make_shared<const Hierarchy>(build_hierarchy(star));
}

/// Thirteen children at level one (uniform interior gaps), two at level two.
HPSSpec thirteen_spec() {
  HPSSpec spec;
  spec.initial_interval = {rat(0), rat(1)};
  LevelSpec first;
  first.n = 13;
  first.c = rat(1, 20);
  first.gaps.assign(14, rat(7, 240));  // 12 interior gaps summing to 7/20
  first.gaps.front() = 0;
  first.gaps.back() = 0;
  spec.levels.push_back(first);
  LevelSpec second;
  second.n = 2;
  second.c = rat(1, 3);
  second.gaps = {rat(0), rat(1, 60), rat(0)};
  spec.levels.push_back(second);
  return spec;
}

}  // namespace

TEST_CASE("branching constant") {
  CHECK(branching_constant(rat(1)) == 3);
  CHECK(branching_constant(rat(12, 5)) == 5);
  CHECK(branching_constant(rat(3)) == 7);
  CHECK_THROWS_AS(branching_constant(rat(1, 2)), std::invalid_argument);
}

TEST_CASE("level exponent") {
  CHECK(level_exponent(2, 3) == 1);
  CHECK(level_exponent(13, 3) == 2);
  CHECK(level_exponent(27, 3) == 3);
  CHECK(level_exponent(8, 3) == 1);
  CHECK(level_exponent(9, 3) == 2);
  CHECK_THROWS_AS(level_exponent(1, 3), std::invalid_argument);
}

TEST_CASE("split sizes follow quotient and remainder") {
  CHECK(split_sizes(13, 3) == std::vector<long>{5, 4, 4});
  CHECK(split_sizes(5, 3) == std::vector<long>{2, 2, 1});
  CHECK(split_sizes(20, 3) == std::vector<long>{7, 7, 6});
}

TEST_CASE("split block witnesses") {
  const GroupNode tree13 = split_block(13, 3, 1);
  CHECK(leaf_sizes(tree13) == std::vector<long>{5, 4, 4});
  const GroupNode tree20 = split_block(20, 3, 1);
  CHECK(leaf_sizes(tree20) == std::vector<long>{7, 7, 6});
  CHECK_THROWS_AS(split_block(13, 3, 2), std::invalid_argument);
}

TEST_CASE("split block partitions and bounds leaves") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    const long M = std::uniform_int_distribution<long>(3, 10)(rng);
    const long n = std::uniform_int_distribution<long>(2, 5000)(rng);
    const GroupNode tree = split_block(n, M, level_exponent(n, M) - 1);
    const std::vector<long> sizes = leaf_sizes(tree);
    CAPTURE(n, M);
    CHECK(std::accumulate(sizes.begin(), sizes.end(), 0L) == n);
    for (long s : sizes) {
      CHECK(s >= 1);
      CHECK(s <= M * M);
    }
  }
}

TEST_CASE("middle-thirds hierarchy has no intermediate levels") {
  const auto h = make_hierarchy(make_middle_thirds(4));
  CHECK(h->branch_constant == 3);
  CHECK(h->markers == std::vector<long>{0, 1, 2, 3});
  for (long m = 0; m <= h->top(); ++m) {
    const auto& lvl = h->levels[static_cast<std::size_t>(m)];
    REQUIRE(lvl.is_marker);
    REQUIRE(lvl.branches.size() == h->star->count(m));
    for (std::size_t i = 0; i < lvl.branches.size(); ++i)
      CHECK(h->branch_interval(m, i) == h->star->interval(m, i));
  }
  CHECK(verify_hierarchy(*h).all_ok());
}

TEST_CASE("thirteen-branch level regroups in three runs") {
  const auto h = make_hierarchy(thirteen_spec());
  CHECK(h->branch_constant == 3);
  REQUIRE(h->markers == std::vector<long>{0, 2});
  const auto& mid = h->levels[1];
  CHECK_FALSE(mid.is_marker);
  REQUIRE(mid.branches.size() == 3);
  CHECK(mid.branches[0].first == 0);
  CHECK(mid.branches[0].last == 4);
  CHECK(mid.branches[1].first == 5);
  CHECK(mid.branches[1].last == 8);
  CHECK(mid.branches[2].first == 9);
  CHECK(mid.branches[2].last == 12);

  // Each mid-level branch holds at most M^2 = 9 marker branches.
  std::vector<long> counts(3, 0);
  for (const auto& b : h->levels[2].branches) ++counts[static_cast<std::size_t>(b.parent)];
  CHECK(counts == std::vector<long>{5, 4, 4});
  CHECK(verify_hierarchy(*h).all_ok());
}

TEST_CASE("length report on middle-thirds") {
  const auto h = make_hierarchy(make_middle_thirds(3));
  const LevelLengthReport report = level_length_report(*h);
  REQUIRE(report.all_ok);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[1].total == rat(2, 3));
  CHECK(report.rows[2].total == rat(4, 9));
}

TEST_CASE("length report bounds the intermediate level") {
  const auto h = make_hierarchy(thirteen_spec());
  const LevelLengthReport report = level_length_report(*h);
  REQUIRE(report.all_ok);
  const LevelLengthRow& mid = report.rows[1];
  REQUIRE_FALSE(mid.is_marker);
  // With chi = 1 and M = 3 the loss bound is 1/3 of the root star length.
  CHECK(mid.lower == h->star->star_len[0] / 3);
  CHECK(mid.upper == h->star->star_len[0]);
  CHECK(mid.lower <= mid.total);
  CHECK(mid.total <= mid.upper);
}

TEST_CASE("ratio sequences of middle-thirds are flat") {
  const auto h = make_hierarchy(make_middle_thirds(4));
  const RatioSequences rs = ratio_sequences(*h);
  REQUIRE(rs.checks.all_ok());
  for (long m = 1; m <= h->top(); ++m) {
    CHECK(rs.max_child_ratio[static_cast<std::size_t>(m)] == rat(1, 3));
    CHECK(rs.min_child_ratio[static_cast<std::size_t>(m)] == rat(1, 3));
    CHECK(rs.max_gap_ratio[static_cast<std::size_t>(m)] == rat(1, 3));
    CHECK(rs.min_gap_ratio[static_cast<std::size_t>(m)] == rat(1, 3));
    CHECK_FALSE(rs.zero_gap_level[static_cast<std::size_t>(m)]);
  }
}

TEST_CASE("total length equals the gap product on middle-thirds") {
  // Both product bounds hold with equality for this family.
  const auto h = make_hierarchy(make_middle_thirds(5));
  Rational prod = 1;
  for (long m = 1; m <= h->top(); ++m) {
    prod *= rat(2, 3);
    CHECK(h->total_length(m) == prod);
  }
}

TEST_CASE("trend table is flat for middle-thirds") {
  const auto h = make_hierarchy(make_middle_thirds(8));
  const SubsequenceReport report = subsequence_report(*h, rat(1, 2), 1.0);
  REQUIRE_FALSE(report.rows.empty());
  for (const SubseqRow& row : report.rows) {
    CHECK_THAT(row.total_pow, Catch::Matchers::WithinRel(2.0 / 3.0, 1e-12));
    CHECK(row.small_gap_frac == 1.0);  // gap ratio 1/3 <= 1/2 at every level
  }
}

TEST_CASE("trend table rejects out-of-range parameters") {
  const auto h = make_hierarchy(make_middle_thirds(4));
  CHECK_THROWS_AS(subsequence_report(*h, rat(0), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(subsequence_report(*h, rat(1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(subsequence_report(*h, rat(1, 2), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(subsequence_report(*h, rat(1, 2), 1.5), std::invalid_argument);
}

TEST_CASE("trend climbs for the near-full family") {
  const auto h = make_hierarchy(make_near_full(16));
  const SubsequenceReport report = subsequence_report(*h, rat(1, 10), 0.5);
  REQUIRE(report.rows.size() >= 3);
  const auto& rows = report.rows;
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].total_pow > rows[i - 1].total_pow);
  CHECK(report.best_index == static_cast<long>(rows.size()) - 1);
  CHECK(rows.back().total_pow < 1.0);
}

TEST_CASE("local length range matches the full scan") {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 8; ++trial) {
    const HPSSpec spec = hps_test::random_valid_spec(rng, 4, 40, 800);
    const auto h = make_hierarchy(spec);
    for (long m = 0; m <= h->top(); ++m) {
      CAPTURE(trial, m);
      CHECK(h->length_range(m) == h->length_range_local(m));
    }
  }
}

TEST_CASE("hierarchy checks pass on random specs") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const HPSSpec spec = hps_test::random_valid_spec(rng, 4, 120, 3000);
    const auto h = make_hierarchy(spec);
    CAPTURE(trial);
    CHECK(verify_hierarchy(*h).all_ok());
    CHECK(level_length_report(*h).all_ok);
    CHECK(ratio_sequences(*h).checks.all_ok());
  }
}

TEST_CASE("chi below the derived bound is rejected") {
  HPSSpec spec;
  spec.initial_interval = {rat(0), rat(1)};
  LevelSpec lvl;
  lvl.n = 3;
  lvl.c = rat(1, 10);
  lvl.gaps = {rat(2, 10), rat(1, 10), rat(2, 10), rat(2, 10)};  // ratio 2
  spec.levels.push_back(lvl);
  LevelSpec second;
  second.n = 2;
  second.c = rat(1, 4);
  second.gaps = {rat(0), rat(1, 20), rat(0)};
  spec.levels.push_back(second);
  REQUIRE(validate_spec(spec).ok);

  auto levels = std::make_shared<const LevelSet>(build_levels(spec));
  auto star = std::make_shared<const StarSystem>(star_system(spec, levels));
  CHECK_THROWS_AS(build_hierarchy(star, rat(3, 2)), std::invalid_argument);
  CHECK(verify_hierarchy(build_hierarchy(star, rat(2))).all_ok());
  CHECK(verify_hierarchy(build_hierarchy(star, rat(5))).all_ok());  // slack is allowed
}
