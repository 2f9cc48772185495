#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hps/errors.hpp"
#include "hps/qsmaps.hpp"

namespace hps {

namespace detail {
/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};
}  // namespace detail

/// Branch masses on an image hierarchy: the root carries mass 1 and every
/// branch splits its mass over its children in proportion to the d-th powers
/// of the children's lengths.
struct BranchMeasure {
  double d = 0;
  std::vector<std::vector<double>> mass;  // per level, per branch

  double level_total(long m) const {
    detail::CompensatedSum sum;
    for (double v : mass[static_cast<std::size_t>(m)]) sum.add(v);
    return sum.value();
  }
};

inline BranchMeasure build_mu(const ImageHierarchy& image, double d) {
  if (!(d > 0) || !(d < 1)) throw std::invalid_argument("build_mu: d must lie in (0,1)");
  BranchMeasure mu;
  mu.d = d;
  mu.mass.resize(image.levels.size());
  mu.mass[0].assign(image.levels[0].branches.size(), 1.0);

  for (long m = 1; m <= image.top(); ++m) {
    const auto& lvl = image.levels[static_cast<std::size_t>(m)];
    const auto& parent_mass = mu.mass[static_cast<std::size_t>(m - 1)];
    auto& out = mu.mass[static_cast<std::size_t>(m)];
    out.resize(lvl.branches.size());

    std::vector<double> weights(lvl.branches.size());
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      const double len = lvl.branches[i].hi - lvl.branches[i].lo;
      if (!(len > 0))
        throw InvariantViolation("build_mu: zero-length image branch (degenerate map)",
                                 "{\"level\":" + std::to_string(m) + ",\"branch\":" +
                                     std::to_string(i) + "}");
      weights[i] = std::pow(len, d);
    }

    // Children of one parent are contiguous; split each parent's mass in turn.
    std::size_t begin = 0;
    while (begin < lvl.branches.size()) {
      const std::int64_t parent = lvl.branches[begin].parent;
      std::size_t end = begin;
      detail::CompensatedSum wsum;
      while (end < lvl.branches.size() && lvl.branches[end].parent == parent) {
        wsum.add(weights[end]);
        ++end;
      }
      const double scale = parent_mass[static_cast<std::size_t>(parent)] / wsum.value();
      for (std::size_t i = begin; i < end; ++i) out[i] = weights[i] * scale;
      begin = end;
    }
  }
  return mu;
}

/// Worst per-level deviation of the total mass from 1.
inline double max_level_mass_drift(const BranchMeasure& mu) {
  double worst = 0;
  for (std::size_t m = 0; m < mu.mass.size(); ++m)
    worst = std::max(worst, std::fabs(mu.level_total(static_cast<long>(m)) - 1.0));
  return worst;
}

/// Per-level maxima of mass / length^d, with the factor chain of the argmax
/// branch so growth can be attributed to levels.
struct RatioScanRow {
  long m = 0;
  double max_ratio = 0;
  std::size_t argmax = 0;
  std::vector<double> factors;  // per ancestor level j: |J_j|^d / sum of child weights
};

/// Default scan levels: one below each marker (a = m_k - 1, a >= 1).
inline std::vector<long> default_scan_levels(const Hierarchy& h) {
  std::vector<long> levels;
  for (std::size_t k = 1; k < h.markers.size(); ++k)
    if (h.markers[k] - 1 >= 1) levels.push_back(h.markers[k] - 1);
  return levels;
}

inline std::vector<RatioScanRow> ratio_scan(const BranchMeasure& mu, const ImageHierarchy& image,
                                            std::vector<long> levels_to_check = {}) {
  if (levels_to_check.empty() && image.source)
    levels_to_check = default_scan_levels(*image.source);

  std::vector<RatioScanRow> rows;
  for (long m : levels_to_check) {
    if (m < 0 || m > image.top())
      throw std::invalid_argument("ratio_scan: level out of range: " + std::to_string(m));
    const auto& lvl = image.levels[static_cast<std::size_t>(m)];
    RatioScanRow row;
    row.m = m;
    row.max_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      const double len = lvl.branches[i].hi - lvl.branches[i].lo;
      const double ratio = mu.mass[static_cast<std::size_t>(m)][i] / std::pow(len, mu.d);
      if (ratio > row.max_ratio) {
        row.max_ratio = ratio;
        row.argmax = i;
      }
    }

    // Factor decomposition along the ancestor chain of the argmax branch:
    // mass(J)/|J|^d = mass(root)/|root|^d * prod_j |J_j|^d / sum_i |J_{j,i}|^d.
    std::vector<std::int64_t> chain;  // indices from level m up to the root
    std::int64_t idx = static_cast<std::int64_t>(row.argmax);
    for (long j = m; j >= 0; --j) {
      chain.push_back(idx);
      idx = image.levels[static_cast<std::size_t>(j)].branches[static_cast<std::size_t>(idx)].parent;
    }
    for (long j = 0; j < m; ++j) {
      const std::size_t parent_index = static_cast<std::size_t>(chain[static_cast<std::size_t>(m - j)]);
      const auto& parent = image.levels[static_cast<std::size_t>(j)].branches[parent_index];
      const double parent_len = parent.hi - parent.lo;
      detail::CompensatedSum wsum;
      const auto& next = image.levels[static_cast<std::size_t>(j + 1)].branches;
      // Children of one parent are contiguous and parents are nondecreasing.
      auto lo_it = std::lower_bound(next.begin(), next.end(), static_cast<std::int64_t>(parent_index),
                                    [](const ImageHierarchy::Branch& b, std::int64_t p) {
                                      return b.parent < p;
                                    });
      for (; lo_it != next.end() && lo_it->parent == static_cast<std::int64_t>(parent_index);
           ++lo_it)
        wsum.add(std::pow(lo_it->hi - lo_it->lo, mu.d));
      row.factors.push_back(std::pow(parent_len, mu.d) / wsum.value());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Mass of the branches of one image level meeting the ball B(x, r), counted
/// through the preimage so float edges cannot inflate the count.
inline double ball_mass(const BranchMeasure& mu, const ImageHierarchy& image, long m, double x,
                        double r, std::size_t* meet_count = nullptr) {
  const QSMapSpec& f = image.map;
  const double pre_lo = f.inverse(x - r), pre_hi = f.inverse(x + r);
  const Hierarchy& src = *image.source;
  const auto& lvl = src.levels[static_cast<std::size_t>(m)];

  // Branches are ordered, so locate the overlap run by bisection on the
  // right endpoints.
  std::size_t begin = lvl.branches.size(), probe_lo = 0, probe_hi = lvl.branches.size();
  while (probe_lo < probe_hi) {
    const std::size_t mid = (probe_lo + probe_hi) / 2;
    if (to_double(src.branch_interval(m, mid).hi) >= pre_lo)
      probe_hi = mid;
    else
      probe_lo = mid + 1;
  }
  begin = probe_lo;

  detail::CompensatedSum sum;
  std::size_t count = 0;
  for (std::size_t i = begin; i < lvl.branches.size(); ++i) {
    const IntervalR iv = src.branch_interval(m, i);
    if (to_double(iv.lo) > pre_hi) break;
    if (to_double(iv.hi) >= pre_lo) {
      sum.add(mu.mass[static_cast<std::size_t>(m)][i]);
      ++count;
    }
  }
  if (meet_count) *meet_count = count;
  return sum.value();
}

struct BallScanRow {
  double x = 0;
  double r = 0;
  double mass = 0;
  double ratio = 0;  // mass / r^d
  long level = 0;
  std::size_t meet_count = 0;
};

struct BallScanReport {
  std::vector<BallScanRow> rows;
  std::vector<double> running_min;  // per sample point, over deepening levels
  std::size_t max_meet_count = 0;
};

/// For each sample point and each of the deepest `radii_per_point` scan
/// levels, choose r so the preimage of B(x, r) has length between the minimum
/// branch lengths of the previous and current level, then total the masses of
/// the branches the ball meets.
inline BallScanReport ball_scan(const BranchMeasure& mu, const ImageHierarchy& image, double d,
                                const std::vector<double>& sample_points,
                                long radii_per_point) {
  if (std::fabs(d - mu.d) > 1e-15)
    throw std::invalid_argument("ball_scan: d does not match the measure");
  if (!image.source) throw std::invalid_argument("ball_scan: image lacks source hierarchy");
  const Hierarchy& src = *image.source;
  const QSMapSpec& f = image.map;

  std::vector<long> levels = default_scan_levels(src);
  if (radii_per_point > 0 && static_cast<long>(levels.size()) > radii_per_point)
    levels.erase(levels.begin(), levels.end() - radii_per_point);

  std::vector<std::pair<double, double>> scales;  // (min length at a, min length at a-1)
  scales.reserve(levels.size());
  for (long a : levels)
    scales.push_back({to_double(src.length_range_local(a).first),
                      to_double(src.length_range_local(a - 1).first)});

  BallScanReport report;
  for (double x : sample_points) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const long a = levels[li];
      const double scale_cur = scales[li].first;
      const double scale_prev = scales[li].second;
      const double target = std::sqrt(scale_cur * scale_prev);

      // Preimage length of B(x, r) is continuous and increasing in r.
      auto preimage_len = [&](double r) { return f.inverse(x + r) - f.inverse(x - r); };
      double r_hi = scale_prev;
      while (preimage_len(r_hi) < target) r_hi *= 2;
      double r_lo = 0;
      for (int it = 0; it < 200 && (preimage_len(r_hi) > 1.0000001 * target); ++it) {
        const double mid = (r_lo + r_hi) / 2;
        (preimage_len(mid) >= target ? r_hi : r_lo) = mid;
      }
      const double r = r_hi;

      BallScanRow row;
      row.x = x;
      row.r = r;
      row.level = a;
      row.mass = ball_mass(mu, image, a, x, r, &row.meet_count);
      row.ratio = row.mass / std::pow(r, d);
      best = std::min(best, row.ratio);
      report.max_meet_count = std::max(report.max_meet_count, row.meet_count);
      report.rows.push_back(row);
    }
    report.running_min.push_back(best);
  }
  return report;
}

/// Evenly spread left endpoints of the deepest level, mapped forward.
inline std::vector<double> default_sample_points(const ImageHierarchy& image, long count) {
  const Hierarchy& src = *image.source;
  const long m = src.top();
  const auto& branches = src.levels[static_cast<std::size_t>(m)].branches;
  std::vector<double> points;
  const long n = std::max<long>(1, std::min<long>(count, static_cast<long>(branches.size())));
  for (long i = 0; i < n; ++i) {
    const std::size_t idx =
        (n == 1) ? 0 : static_cast<std::size_t>(i * (branches.size() - 1) / (n - 1));
    points.push_back(image.map(to_double(src.branch_interval(m, idx).lo)));
  }
  return points;
}

}  // namespace hps
