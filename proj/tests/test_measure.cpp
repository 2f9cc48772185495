#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "hps/measure.hpp"
#include "test_support.hpp"

using namespace hps;
using hps_test::rat;

namespace {

std::shared_ptr<const Hierarchy> make_hierarchy(const HPSSpec& spec) {
  auto levels = std::make_shared<const LevelSet>(build_levels(spec));
  auto star = std::make_shared<const StarSystem>(star_system(spec, levels));
  return std::make_shared<const Hierarchy>(build_hierarchy(star));
}

ImageHierarchy middle_thirds_image(long K, const QSMapSpec& map = QSMapSpec::identity()) {
  return push_hierarchy(map, make_hierarchy(make_middle_thirds(K)));
}

}  // namespace

TEST_CASE("equal children split the mass evenly for every d") {
  const ImageHierarchy image = middle_thirds_image(4);
  for (double d : {0.2, 0.5, 0.8}) {
    const BranchMeasure mu = build_mu(image, d);
    for (long m = 0; m <= image.top(); ++m)
      for (double mass : mu.mass[static_cast<std::size_t>(m)])
        CHECK_THAT(mass, Catch::Matchers::WithinRel(std::pow(2.0, -double(m)), 1e-12));
  }
}

TEST_CASE("mass splits by the d-th power of the lengths") {
  // Two children of lengths 0.4 and 0.1 under d=1/2 get 2/3 and 1/3.
  ImageHierarchy image;
  image.levels.resize(2);
  image.levels[0].branches = {{0.0, 1.0, -1}};
  image.levels[1].branches = {{0.0, 0.4, 0}, {0.9, 1.0, 0}};
  const BranchMeasure mu = build_mu(image, 0.5);
  CHECK_THAT(mu.mass[1][0], Catch::Matchers::WithinRel(2.0 / 3.0, 1e-12));
  CHECK_THAT(mu.mass[1][1], Catch::Matchers::WithinRel(1.0 / 3.0, 1e-12));
}

TEST_CASE("degenerate image branches are an error") {
  ImageHierarchy image;
  image.levels.resize(2);
  image.levels[0].branches = {{0.0, 1.0, -1}};
  image.levels[1].branches = {{0.2, 0.2, 0}, {0.5, 1.0, 0}};
  CHECK_THROWS_AS(build_mu(image, 0.5), InvariantViolation);
  CHECK_THROWS_AS(build_mu(middle_thirds_image(3), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_mu(middle_thirds_image(3), 1.0), std::invalid_argument);
}

TEST_CASE("masses are conserved level by level") {
  const ImageHierarchy image = middle_thirds_image(10, QSMapSpec::power(2.0));
  const BranchMeasure mu = build_mu(image, 0.6);
  CHECK(max_level_mass_drift(mu) < 1e-12);
}

TEST_CASE("a branch carries the mass of its descendants") {
  const ImageHierarchy image = middle_thirds_image(8, QSMapSpec::power(0.5));
  const BranchMeasure mu = build_mu(image, 0.7);
  const long deep = image.top();
  for (long m = 0; m < deep; ++m) {
    std::vector<double> rollup(mu.mass[static_cast<std::size_t>(m)].size(), 0.0);
    // Accumulate the deepest level upward through the parent chain.
    const auto& levels = image.levels;
    std::vector<double> carry = mu.mass[static_cast<std::size_t>(deep)];
    for (long j = deep; j > m; --j) {
      std::vector<double> up(levels[static_cast<std::size_t>(j - 1)].branches.size(), 0.0);
      for (std::size_t i = 0; i < carry.size(); ++i)
        up[static_cast<std::size_t>(levels[static_cast<std::size_t>(j)].branches[i].parent)] +=
            carry[i];
      carry = std::move(up);
    }
    rollup = carry;
    for (std::size_t i = 0; i < rollup.size(); ++i)
      CHECK_THAT(rollup[i],
                 Catch::Matchers::WithinRel(mu.mass[static_cast<std::size_t>(m)][i], 1e-9));
  }
}

TEST_CASE("ratio scan detects the similarity dimension of middle thirds") {
  const ImageHierarchy image = middle_thirds_image(12);
  const double s = std::log(2.0) / std::log(3.0);

  // Max ratio at scan level a is (2^-a) / (3^-a)^d; its log-slope in a is
  // d log 3 - log 2, negative below s and positive above.
  for (double d : {0.5, 0.7}) {
    const BranchMeasure mu = build_mu(image, d);
    const auto rows = ratio_scan(mu, image);
    REQUIRE(rows.size() >= 4);
    for (const auto& row : rows) {
      const double expect =
          std::pow(2.0, -double(row.m)) / std::pow(std::pow(3.0, -double(row.m)), d);
      CHECK_THAT(row.max_ratio, Catch::Matchers::WithinRel(expect, 1e-9));
    }
    const double slope = (std::log(rows.back().max_ratio) - std::log(rows.front().max_ratio)) /
                         static_cast<double>(rows.back().m - rows.front().m);
    if (d < s)
      CHECK(slope < 0);
    else
      CHECK(slope > 0);
  }
}

TEST_CASE("factor chains multiply back to the scanned ratio") {
  const ImageHierarchy image = middle_thirds_image(7, QSMapSpec::power(2.0));
  const BranchMeasure mu = build_mu(image, 0.6);
  const auto rows = ratio_scan(mu, image, {3, 5});
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    double product = 1.0;
    for (double f : row.factors) product *= f;
    const auto& root = image.levels[0].branches[0];
    product /= std::pow(root.hi - root.lo, mu.d);  // root mass is 1, not |J0|^d
    CHECK_THAT(row.max_ratio, Catch::Matchers::WithinRel(product, 1e-9));
  }
}

TEST_CASE("ball mass at the left edge of middle thirds") {
  const ImageHierarchy image = middle_thirds_image(9);
  const BranchMeasure mu = build_mu(image, 0.5);
  double prev = 2.0;
  for (long k = 1; k <= 5; ++k) {
    const double r = std::pow(3.0, -double(k));
    std::size_t count = 0;
    const double mass = ball_mass(mu, image, k, 0.0, r, &count);
    CHECK(count == 1);  // only the leftmost branch meets [-r, r]
    CHECK_THAT(mass, Catch::Matchers::WithinRel(std::pow(2.0, -double(k)), 1e-12));
    const double ratio = mass / std::sqrt(r);
    CHECK_THAT(ratio, Catch::Matchers::WithinRel(
                          std::pow(2.0, -double(k)) * std::pow(3.0, 0.5 * k), 1e-12));
    CHECK(ratio < prev);  // running minimum keeps decreasing
    prev = ratio;
  }
}

TEST_CASE("a unit ball swallows the whole set") {
  const ImageHierarchy image = middle_thirds_image(6);
  const BranchMeasure mu = build_mu(image, 0.5);
  for (double r : {1.0, 1.5, 2.0}) {
    const double mass = ball_mass(mu, image, image.top(), 0.0, r);
    CHECK_THAT(mass, Catch::Matchers::WithinRel(1.0, 1e-12));
    CHECK(mass / std::sqrt(r) <= 1.0 + 1e-12);
  }
}

TEST_CASE("ball scan respects the branch-meeting budget") {
  for (const auto& map : {QSMapSpec::identity(), QSMapSpec::power(2.0)}) {
    const ImageHierarchy image = middle_thirds_image(10, map);
    const BranchMeasure mu = build_mu(image, 0.6);
    const BallScanReport report =
        ball_scan(mu, image, 0.6, default_sample_points(image, 5), 5);
    const long M = image.source->branch_constant;
    REQUIRE_FALSE(report.rows.empty());
    CHECK(report.max_meet_count <= static_cast<std::size_t>(2 * M * M));
    for (const auto& row : report.rows) {
      CHECK(row.r > 0);
      CHECK(row.mass >= 0);
    }
    CHECK(report.running_min.size() == 5);
  }
}

TEST_CASE("ball radii land between consecutive level scales") {
  const ImageHierarchy image = middle_thirds_image(8, QSMapSpec::power(2.0));
  const BranchMeasure mu = build_mu(image, 0.5);
  const std::vector<double> points = default_sample_points(image, 3);
  const BallScanReport report = ball_scan(mu, image, 0.5, points, 4);
  for (const auto& row : report.rows) {
    const double len_cur = to_double(image.source->length_range_local(row.level).first);
    const double len_prev = to_double(image.source->length_range_local(row.level - 1).first);
    const double pre = image.map.inverse(row.x + row.r) - image.map.inverse(row.x - row.r);
    CHECK(pre >= len_cur * (1 - 1e-9));
    CHECK(pre < len_prev);
  }
}

TEST_CASE("near-full ratios stay bounded under identity at d=0.9") {
  const ImageHierarchy image =
      push_hierarchy(QSMapSpec::identity(), make_hierarchy(make_near_full(14)));
  const BranchMeasure mu = build_mu(image, 0.9);
  const auto rows = ratio_scan(mu, image);
  REQUIRE(rows.size() >= 5);
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].max_ratio <= rows[i - 1].max_ratio * (1 + 1e-12));
  CHECK(rows.back().max_ratio <= 10 * rows.front().max_ratio);
}

TEST_CASE("scan levels default to one below each marker") {
  // Depth 6 gives markers 0..5, so the usable pre-marker levels are 1..4.
  const auto h = make_hierarchy(make_middle_thirds(6));
  const std::vector<long> levels = default_scan_levels(*h);
  CHECK(levels == std::vector<long>{1, 2, 3, 4});
}
