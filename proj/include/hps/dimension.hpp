#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hps/errors.hpp"
#include "hps/measure.hpp"

namespace hps {

/// The dimension-formula sequence evaluated at finite depth, with the initial
/// interval normalized to unit length.
struct FormulaReport {
  std::vector<double> values;  // t_k for k = 1..K-1, values[0] is t_1
  double tail = 0;             // max over the trailing window
  long window = 0;
  bool chi_ok = true;          // interior-gap comparability held at every level
  std::string normalization;
};

inline FormulaReport formula_dim(const HPSSpec& spec, const StarSystem& star, long window = 0) {
  const long K = spec.depth();
  if (star.usable_depth() < 1)
    throw std::invalid_argument("formula_dim: star parameters missing (depth < 2)");

  FormulaReport report;
  report.normalization = "initial interval scaled to unit length";
  try {
    derive_chi(spec);
  } catch (const std::invalid_argument&) {
    report.chi_ok = false;
  }

  const Rational i0_len = spec.initial_interval.length();
  double log_branches = std::log(static_cast<double>(spec.level(1).n));
  for (long k = 1; k <= K - 1; ++k) {
    const long n_next = spec.level(k + 1).n;
    log_branches += std::log(static_cast<double>(n_next));
    // delta_k / |I0| = c_1..c_k - normalized end gaps of level k+1
    const Rational arg = star.star_len[static_cast<std::size_t>(k)] / (i0_len * n_next);
    if (arg <= 0)
      throw InvariantViolation("formula_dim: degenerate level " + std::to_string(k),
                               "{\"level\":" + std::to_string(k) + "}");
    const double denom = -log_rational(arg);
    report.values.push_back(log_branches / denom);
  }

  const long count = static_cast<long>(report.values.size());
  report.window = (window > 0) ? std::min(window, count) : std::max<long>(1, count / 4);
  report.tail = *std::max_element(report.values.end() - report.window, report.values.end());
  return report;
}

/// Box-count table over a list of scales plus the fitted log-log slope.
struct BoxRow {
  double scale = 0;
  unsigned long long count = 0;
};

struct BoxReport {
  std::vector<BoxRow> rows;
  double slope = 0;
  double residual = 0;                // RMS of the least-squares fit
  std::vector<double> window_slopes;  // fits over successive scale windows
};

namespace detail {

inline void fit_box_report(BoxReport& report) {
  const std::size_t n = report.rows.size();
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = std::log(1.0 / report.rows[i].scale);
    ys[i] = std::log(static_cast<double>(report.rows[i].count));
  }
  auto fit = [&](std::size_t begin, std::size_t end) {
    double mx = 0, my = 0;
    for (std::size_t i = begin; i < end; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    const double cnt = static_cast<double>(end - begin);
    mx /= cnt;
    my /= cnt;
    double sxx = 0, sxy = 0;
    for (std::size_t i = begin; i < end; ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    return sxy / sxx;
  };

  report.slope = fit(0, n);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fitted = my + report.slope * (xs[i] - mx);
    ss += (ys[i] - fitted) * (ys[i] - fitted);
  }
  report.residual = std::sqrt(ss / static_cast<double>(n));

  // Successive windows of four scales (last window absorbs the remainder).
  const std::size_t w = 4;
  for (std::size_t begin = 0; begin + 2 <= n;) {
    std::size_t end = begin + w;
    if (end > n || n - end < 2) end = n;
    report.window_slopes.push_back(fit(begin, end));
    if (end == n) break;
    begin = end;
  }
}

}  // namespace detail

namespace detail {
inline BigInt floor_rational(const Rational& r) {
  BigInt q = numerator(r) / denominator(r);
  if (r < 0 && q * denominator(r) != numerator(r)) --q;
  return q;
}
}  // namespace detail

/// Exact grid count: cells [j*scale, (j+1)*scale) that overlap the interval
/// union in positive length. Intervals must be ordered with disjoint
/// interiors. Exact rational arithmetic throughout.
inline unsigned long long grid_count(const std::vector<IntervalR>& set, const Rational& scale) {
  unsigned long long count = 0;
  bool have_last = false;
  BigInt last_cell = 0;
  for (const IntervalR& iv : set) {
    if (iv.length() <= 0) continue;
    // First cell j with (j+1)*scale > lo is floor(lo/scale); last cell j with
    // j*scale < hi is ceil(hi/scale) - 1.
    BigInt j_lo = detail::floor_rational(iv.lo / scale);
    const Rational hr = iv.hi / scale;
    BigInt j_hi = detail::floor_rational(hr);
    if (j_hi * denominator(hr) == numerator(hr)) --j_hi;
    if (have_last && j_lo <= last_cell) j_lo = last_cell + 1;
    if (j_hi >= j_lo) {
      count += (j_hi - j_lo + 1).convert_to<unsigned long long>();
      last_cell = j_hi;
      have_last = true;
    }
  }
  return count;
}

/// Same convention in double precision for image-side interval unions.
inline unsigned long long grid_count(const std::vector<IntervalD>& set, double scale) {
  unsigned long long count = 0;
  bool have_last = false;
  long long last_cell = 0;
  for (const IntervalD& iv : set) {
    if (!(iv.hi > iv.lo)) continue;
    long long j_lo = static_cast<long long>(std::floor(iv.lo / scale));
    while ((j_lo + 1) * scale <= iv.lo) ++j_lo;
    while (j_lo * scale > iv.lo) --j_lo;
    long long j_hi = static_cast<long long>(std::ceil(iv.hi / scale)) - 1;
    while (j_hi * scale >= iv.hi) --j_hi;
    while ((j_hi + 1) * scale < iv.hi) ++j_hi;
    if (have_last && j_lo <= last_cell) j_lo = last_cell + 1;
    if (j_hi >= j_lo) {
      count += static_cast<unsigned long long>(j_hi - j_lo + 1);
      last_cell = j_hi;
      have_last = true;
    }
  }
  return count;
}

inline BoxReport box_dim(const std::vector<IntervalR>& set, const std::vector<Rational>& scales) {
  if (set.empty() || scales.size() < 2)
    throw std::invalid_argument("box_dim: need a set and at least two scales");
  Rational hull = set.back().hi - set.front().lo;
  for (const Rational& scale : scales) {
    if (scale <= 0) throw std::invalid_argument("box_dim: scale must be positive");
    if (scale > hull)
      throw std::invalid_argument("box_dim: scale coarser than the set hull");
  }
  BoxReport report;
  for (const Rational& scale : scales)
    report.rows.push_back({to_double(scale), grid_count(set, scale)});
  detail::fit_box_report(report);
  return report;
}

inline BoxReport box_dim(const std::vector<IntervalD>& set, const std::vector<double>& scales) {
  if (set.empty() || scales.size() < 2)
    throw std::invalid_argument("box_dim: need a set and at least two scales");
  const double hull = set.back().hi - set.front().lo;
  for (double scale : scales) {
    if (!(scale > 0)) throw std::invalid_argument("box_dim: scale must be positive");
    if (scale > hull)
      throw std::invalid_argument("box_dim: scale coarser than the set hull");
  }
  BoxReport report;
  for (double scale : scales) report.rows.push_back({scale, grid_count(set, scale)});
  detail::fit_box_report(report);
  return report;
}

inline std::vector<IntervalR> leaf_intervals(const LevelSet& set) {
  std::vector<IntervalR> out;
  const long k = set.depth();
  out.reserve(set.count(k));
  for (std::size_t i = 0; i < set.count(k); ++i) out.push_back(set.interval(k, i));
  return out;
}

inline std::vector<IntervalD> image_leaves(const ImageHierarchy& image) {
  std::vector<IntervalD> out;
  const auto& branches = image.levels.back().branches;
  out.reserve(branches.size());
  for (const auto& b : branches) out.push_back({b.lo, b.hi});
  return out;
}

inline std::vector<IntervalD> to_double_intervals(const std::vector<IntervalR>& set) {
  std::vector<IntervalD> out;
  out.reserve(set.size());
  for (const IntervalR& iv : set) out.push_back({to_double(iv.lo), to_double(iv.hi)});
  return out;
}

/// One full pipeline run: construction, reconstruction, hierarchy, image,
/// measures, and both dimension estimates, juxtaposed in a single report.
struct ExperimentOptions {
  double tail_threshold = 0.95;
  long ball_points = 5;
  long radii_per_point = 5;
  long scan_window = 5;        // trailing scan levels for the boundedness verdict
  double growth_factor = 10;   // allowed max-ratio growth across that window
};

struct MeasureVerdict {
  double d = 0;
  std::vector<RatioScanRow> scan;
  bool bounded = true;
  double window_first_max = 0;
  double window_last_max = 0;
  BallScanReport balls;
};

struct ExperimentReport {
  FormulaReport formula;
  bool hypothesis_met = true;
  double tail_threshold = 0;
  BoxReport box_original;
  BoxReport box_image;
  std::vector<MeasureVerdict> verdicts;
  CheckReport structure;  // construction + hierarchy checks, all exact
};

inline ExperimentReport minimality_experiment(const HPSSpec& spec, const QSMapSpec& map,
                                              const std::vector<double>& d_grid, long depth,
                                              const std::vector<Rational>& scales,
                                              ExperimentOptions options = {}) {
  if (depth < 2 || depth > spec.depth())
    throw std::invalid_argument("minimality_experiment: depth must lie in [2, spec depth]");

  ExperimentReport report;
  report.tail_threshold = options.tail_threshold;

  // Formula part uses the full spec; the tree pipeline runs at `depth`.
  const StarSystem star_params = star_system(spec);
  report.formula = formula_dim(spec, star_params, 0);
  report.hypothesis_met = report.formula.chi_ok && report.formula.tail >= options.tail_threshold;

  const HPSSpec pipeline_spec = truncate_spec(spec, depth);
  auto levels = std::make_shared<const LevelSet>(build_levels(pipeline_spec));
  auto star = std::make_shared<const StarSystem>(star_system(pipeline_spec, levels));
  auto hierarchy = std::make_shared<const Hierarchy>(build_hierarchy(star));

  for (const auto& item : verify_levels(pipeline_spec, *levels).items)
    report.structure.items.push_back(item);
  for (const auto& item : verify_star(pipeline_spec, *star, hierarchy->chi).items)
    report.structure.items.push_back(item);
  for (const auto& item : verify_hierarchy(*hierarchy).items)
    report.structure.items.push_back(item);

  report.box_original = box_dim(leaf_intervals(*levels), scales);

  const ImageHierarchy image = push_hierarchy(map, hierarchy);
  std::vector<double> double_scales;
  for (const Rational& s : scales) double_scales.push_back(to_double(s));
  report.box_image = box_dim(image_leaves(image), double_scales);

  for (double d : d_grid) {
    MeasureVerdict verdict;
    verdict.d = d;
    const BranchMeasure mu = build_mu(image, d);
    verdict.scan = ratio_scan(mu, image);
    const long w = std::min<long>(options.scan_window, static_cast<long>(verdict.scan.size()));
    if (w >= 1) {
      verdict.window_first_max = verdict.scan[verdict.scan.size() - static_cast<std::size_t>(w)].max_ratio;
      verdict.window_last_max = verdict.scan.back().max_ratio;
      verdict.bounded =
          verdict.window_last_max <= options.growth_factor * verdict.window_first_max;
    }
    verdict.balls = ball_scan(mu, image, d, default_sample_points(image, options.ball_points),
                              options.radii_per_point);
    report.verdicts.push_back(std::move(verdict));
  }
  return report;
}

}  // namespace hps
