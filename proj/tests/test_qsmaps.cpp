#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "hps/qsmaps.hpp"
#include "test_support.hpp"

using namespace hps;
using hps_test::rat;

namespace {

std::shared_ptr<const Hierarchy> make_hierarchy(const HPSSpec& spec) {
  auto levels = std::make_shared<const LevelSet>(build_levels(spec));
  auto star = std::make_shared<const StarSystem>(star_system(spec, levels));
  return std::make_shared<const Hierarchy>(build_hierarchy(star));
}

}  // namespace

TEST_CASE("map evaluation") {
  CHECK(eval_map(QSMapSpec::identity(), 0.7) == 0.7);
  CHECK(eval_map(QSMapSpec::power(2.0), 0.5) == 0.25);
  CHECK(eval_map(QSMapSpec::power(2.0), -0.5) == -0.25);
  const QSMapSpec comp =
      QSMapSpec::composition({QSMapSpec::affine(2.0, 0.0), QSMapSpec::power(2.0)});
  CHECK(eval_map(comp, 0.5) == 1.0);
}

TEST_CASE("invalid map parameters are rejected") {
  CHECK_THROWS_AS(QSMapSpec::power(0.0), std::invalid_argument);
  CHECK_THROWS_AS(QSMapSpec::power(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(QSMapSpec::affine(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(QSMapSpec::composition({}), std::invalid_argument);
}

TEST_CASE("maps are strictly increasing") {
  const std::vector<QSMapSpec> catalog = {
      QSMapSpec::identity(), QSMapSpec::affine(2.5, -1.0), QSMapSpec::power(2.0),
      QSMapSpec::power(0.5), QSMapSpec::shifted_power(3.0, 0.25),
      QSMapSpec::composition({QSMapSpec::power(2.0), QSMapSpec::affine(0.5, 1.0),
                              QSMapSpec::power(0.5)})};
  std::mt19937_64 rng(9001);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  for (const QSMapSpec& map : catalog) {
    for (int trial = 0; trial < 2000; ++trial) {
      double x = pos(rng), y = pos(rng);
      if (x == y) continue;
      if (x > y) std::swap(x, y);
      REQUIRE(map(x) < map(y));
    }
  }
}

TEST_CASE("inverses round trip") {
  const std::vector<QSMapSpec> catalog = {
      QSMapSpec::identity(), QSMapSpec::affine(2.5, -1.0), QSMapSpec::power(2.0),
      QSMapSpec::shifted_power(2.0, 0.5),
      QSMapSpec::composition({QSMapSpec::affine(3.0, 0.25), QSMapSpec::power(1.5)})};
  std::mt19937_64 rng(9002);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  for (const QSMapSpec& map : catalog) {
    for (int trial = 0; trial < 500; ++trial) {
      const double x = pos(rng);
      CHECK_THAT(map.inverse(map(x)), Catch::Matchers::WithinAbs(x, 1e-9));
    }
  }
}

TEST_CASE("shifted power agrees with its closed form on the right branch") {
  const QSMapSpec map = QSMapSpec::shifted_power(2.0, 0.5);
  CHECK_THAT(map(0.5), Catch::Matchers::WithinRel(std::pow(1.0, 2.0) - 0.25, 1e-15));
  CHECK(map(0.0) == 0.0);
  CHECK(map(-0.5) == -0.25);  // odd about -shift, anchored at the origin
}

TEST_CASE("push keeps order, nesting, and markers") {
  const auto h = make_hierarchy(make_middle_thirds(5));
  const ImageHierarchy image = push_hierarchy(QSMapSpec::power(2.0), h);
  REQUIRE(image.top() == h->top());
  for (long m = 0; m <= image.top(); ++m) {
    const auto& lvl = image.levels[static_cast<std::size_t>(m)];
    CHECK(lvl.is_marker == h->levels[static_cast<std::size_t>(m)].is_marker);
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      CHECK(lvl.branches[i].lo < lvl.branches[i].hi);
      if (i + 1 < lvl.branches.size()) CHECK(lvl.branches[i].hi <= lvl.branches[i + 1].lo);
      if (m >= 1) {
        const auto& parent =
            image.levels[static_cast<std::size_t>(m - 1)]
                .branches[static_cast<std::size_t>(lvl.branches[i].parent)];
        CHECK(parent.lo <= lvl.branches[i].lo);
        CHECK(lvl.branches[i].hi <= parent.hi);
      }
    }
  }
}

TEST_CASE("identity push preserves lengths") {
  const auto h = make_hierarchy(make_near_full(5));
  const ImageHierarchy image = push_hierarchy(QSMapSpec::identity(), h);
  for (long m = 0; m <= image.top(); ++m) {
    const auto& lvl = image.levels[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      const IntervalR iv = h->branch_interval(m, i);
      CHECK(lvl.branches[i].lo == to_double(iv.lo));
      CHECK(lvl.branches[i].hi == to_double(iv.hi));
    }
  }
}

TEST_CASE("squaring a branch") {
  const auto h = make_hierarchy(make_middle_thirds(2));
  const ImageHierarchy image = push_hierarchy(QSMapSpec::power(2.0), h);
  // Branch [2/3, 1] maps to [4/9, 1].
  const auto& lvl = image.levels[1];
  REQUIRE(lvl.branches.size() == 2);
  CHECK_THAT(lvl.branches[1].lo, Catch::Matchers::WithinRel(4.0 / 9.0, 1e-15));
  CHECK(lvl.branches[1].hi == 1.0);
}

TEST_CASE("identity envelope is exact") {
  const DistortionEnvelope env =
      distortion_probe(QSMapSpec::identity(), 20000, {0.5, 2.0, 6.0}, 42);
  CHECK_THAT(env.p, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK_THAT(env.q, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK_THAT(env.beta, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK_THAT(env.K_rho.at(0.5), Catch::Matchers::WithinAbs(0.5, 1e-9));
  CHECK_THAT(env.K_rho.at(2.0), Catch::Matchers::WithinAbs(2.0, 1e-9));
  CHECK_THAT(env.K_rho.at(6.0), Catch::Matchers::WithinAbs(6.0, 1e-9));
}

TEST_CASE("square map envelope sees the squared ratio near zero") {
  const DistortionEnvelope env = distortion_probe(QSMapSpec::power(2.0), 50000, {2.0}, 7);
  CHECK(env.q >= 1.8);  // nested pairs anchored at the origin approach slope 2
  CHECK(env.q <= 2.0 + 1e-9);
  CHECK(env.p == 1.0);  // ratios stay below 4t on [0,1]
}

TEST_CASE("samples stay inside the fitted envelopes") {
  for (const auto& map : {QSMapSpec::power(2.0), QSMapSpec::power(0.5),
                          QSMapSpec::shifted_power(2.0, 0.125)}) {
    const DistortionEnvelope env = distortion_probe(map, 20000, {}, 99);
    const double log_beta = std::log(env.beta);
    for (const auto& [log_t, log_r] : env.samples_log) {
      REQUIRE(log_r <= std::log(4.0) + env.p * log_t + 1e-12);
      REQUIRE(log_r >= log_beta + env.q * log_t - 1e-12);
    }
  }
}

TEST_CASE("envelope exponents are stable under sample doubling") {
  const DistortionEnvelope a = distortion_probe(QSMapSpec::power(2.0), 100000, {}, 1234);
  const DistortionEnvelope b = distortion_probe(QSMapSpec::power(2.0), 200000, {}, 1234);
  CHECK(std::fabs(a.q - b.q) <= 0.1 * a.q);
  CHECK(std::fabs(a.p - b.p) <= 0.1 * a.p);
  CHECK(a.eta_C > 0);
  CHECK(b.eta_C > 0);
  CHECK(std::fabs(a.eta_C - b.eta_C) <= 0.1 * a.eta_C);
}

TEST_CASE("three-point distortion respects the modulus envelope") {
  const DistortionEnvelope env = distortion_probe(QSMapSpec::power(2.0), 30000, {}, 31);
  REQUIRE_FALSE(env.eta_profile.empty());
  CHECK(env.eta_theta == 2.0);
  for (const auto& [t, ratio] : env.eta_profile) {
    const double bound = env.eta_C * std::max(std::pow(t, 2.0), std::pow(t, 0.5));
    CHECK(ratio <= bound * (1 + 1e-12));
  }
}

TEST_CASE("probe rejects bad input") {
  CHECK_THROWS_AS(distortion_probe(QSMapSpec::identity(), 10, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(distortion_probe(QSMapSpec::identity(), 5000, {}, 1, {1.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("probe is deterministic for a fixed seed") {
  const DistortionEnvelope a = distortion_probe(QSMapSpec::power(2.0), 5000, {2.0}, 77);
  const DistortionEnvelope b = distortion_probe(QSMapSpec::power(2.0), 5000, {2.0}, 77);
  CHECK(a.p == b.p);
  CHECK(a.q == b.q);
  CHECK(a.beta == b.beta);
  CHECK(a.K_rho.at(2.0) == b.K_rho.at(2.0));
}
