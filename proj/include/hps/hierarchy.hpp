#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hps/check.hpp"
#include "hps/construction.hpp"
#include "hps/errors.hpp"

namespace hps {

/// Smallest integer strictly above 2*chi: floor(2*chi) + 1.
inline long branching_constant(const Rational& chi) {
  if (chi < 1) throw std::invalid_argument("branching_constant: chi must be >= 1");
  return static_cast<long>(floor_to_ll(2 * chi)) + 1;
}

/// Number of regrouping steps needed for n branches under base M:
/// 1 when n < M, otherwise the unique i with M^i <= n < M^{i+1}.
inline long level_exponent(long n, long M) {
  if (n < 2) throw std::invalid_argument("level_exponent: n must be >= 2");
  if (M < 3) throw std::invalid_argument("level_exponent: M must be >= 3");
  if (n < M) return 1;
  long i = 1;
  long long power = M;  // M^i <= n throughout, so this cannot overflow
  while (power <= n / M) {
    power *= M;
    ++i;
  }
  return i;
}

/// One splitting step: s = M*q + r becomes r groups of q+1 followed by
/// M - r groups of q (larger groups first).
inline std::vector<long> split_sizes(long s, long M) {
  const long q = s / M;
  const long r = s % M;
  std::vector<long> sizes;
  sizes.reserve(static_cast<std::size_t>(M));
  for (long i = 0; i < r; ++i) sizes.push_back(q + 1);
  for (long i = r; i < M; ++i) sizes.push_back(q);
  return sizes;
}

/// Nested group-size tree from repeated quotient-remainder splitting.
struct GroupNode {
  long offset = 0;  // start index within the block of n children
  long size = 0;
  std::vector<GroupNode> children;
};

/// Split a block of n into M groups per step, recursing `levels` times.
/// `levels` must equal level_exponent(n, M) - 1; zero levels yields the
/// trivial single-leaf tree (n already fits in one group of at most M^2).
inline GroupNode split_block(long n, long M, long levels) {
  if (n < 2) throw std::invalid_argument("split_block: n must be >= 2");
  if (levels != level_exponent(n, M) - 1)
    throw std::invalid_argument("split_block: depth must be level_exponent(n, M) - 1");
  GroupNode root{0, n, {}};
  if (levels == 0) return root;

  struct Frame {
    GroupNode* node;
    long depth;
  };
  std::vector<Frame> stack{{&root, 0}};
  while (!stack.empty()) {
    auto [node, depth] = stack.back();
    stack.pop_back();
    if (depth == levels) continue;
    const std::vector<long> sizes = split_sizes(node->size, M);
    node->children.reserve(sizes.size());
    long off = node->offset;
    for (long s : sizes) {
      node->children.push_back({off, s, {}});
      off += s;
    }
    for (auto& child : node->children) stack.push_back({&child, depth + 1});
  }
  return root;
}

inline void collect_leaf_sizes(const GroupNode& node, std::vector<long>& out) {
  if (node.children.empty()) {
    out.push_back(node.size);
    return;
  }
  for (const auto& child : node.children) collect_leaf_sizes(child, out);
}

inline std::vector<long> leaf_sizes(const GroupNode& root) {
  std::vector<long> out;
  collect_leaf_sizes(root, out);
  return out;
}

/// The interpolating branch sequence. Every level is an ordered list of
/// branches; a branch is the hull of a contiguous run of star intervals at
/// the level being subdivided. Endpoints are computed on demand from the
/// star view, so a branch stores only its run and parent link.
struct Hierarchy {
  struct Branch {
    std::int64_t parent = -1;
    std::int64_t first = 0;  // star-interval index range [first, last]
    std::int64_t last = 0;
  };

  struct Level {
    long star_level = 0;  // star level whose intervals this level groups
    bool is_marker = false;
    std::vector<Branch> branches;
  };

  std::shared_ptr<const StarSystem> star;
  Rational chi;
  long branch_constant = 0;            // M
  std::vector<long> level_exponents;   // i_k, k = 1..K' ([0] unused)
  std::vector<long> markers;           // m_k, k = 0..K'
  std::vector<Level> levels;           // m = 0..m_{K'}

  long top() const { return static_cast<long>(levels.size()) - 1; }

  IntervalR branch_interval(long m, std::size_t i) const {
    const Level& lvl = levels[static_cast<std::size_t>(m)];
    const Branch& b = lvl.branches[i];
    return {star->interval(lvl.star_level, static_cast<std::size_t>(b.first)).lo,
            star->interval(lvl.star_level, static_cast<std::size_t>(b.last)).hi};
  }

  Rational branch_length(long m, std::size_t i) const {
    const IntervalR iv = branch_interval(m, i);
    return iv.hi - iv.lo;
  }

  Rational total_length(long m) const {
    Rational sum = 0;
    for (std::size_t i = 0; i < levels[static_cast<std::size_t>(m)].branches.size(); ++i)
      sum += branch_length(m, i);
    return sum;
  }

  /// Extremes of branch length at one level.
  std::pair<Rational, Rational> length_range(long m) const {
    Rational mn = branch_length(m, 0), mx = mn;
    for (std::size_t i = 1; i < levels[static_cast<std::size_t>(m)].branches.size(); ++i) {
      const Rational len = branch_length(m, i);
      if (len < mn) mn = len;
      if (len > mx) mx = len;
    }
    return {mn, mx};
  }

  /// Same extremes computed from the first star parent's block of branches.
  /// Group layout and gap values are identical across star parents, so one
  /// block realizes the whole range.
  std::pair<Rational, Rational> length_range_local(long m) const {
    const Level& lvl = levels[static_cast<std::size_t>(m)];
    std::size_t per_parent = lvl.branches.size();
    if (lvl.star_level >= 1) per_parent /= star->count(lvl.star_level - 1);
    Rational mn = branch_length(m, 0), mx = mn;
    for (std::size_t i = 1; i < per_parent; ++i) {
      const Rational len = branch_length(m, i);
      if (len < mn) mn = len;
      if (len > mx) mx = len;
    }
    return {mn, mx};
  }
};

inline Hierarchy build_hierarchy(std::shared_ptr<const StarSystem> star, Rational chi) {
  if (!star || !star->base) throw std::invalid_argument("build_hierarchy: star view not built");
  if (star->usable_depth() < 1) throw std::invalid_argument("build_hierarchy: star depth < 1");
  const Rational derived = derive_chi(star->spec);
  if (chi < derived)
    throw std::invalid_argument("build_hierarchy: chi below the spec's derived gap ratio");

  Hierarchy h;
  h.star = star;
  h.chi = chi;
  h.branch_constant = branching_constant(chi);
  const long M = h.branch_constant;
  const long Kp = star->usable_depth();

  h.level_exponents.assign(static_cast<std::size_t>(Kp) + 1, 0);
  h.markers.assign(static_cast<std::size_t>(Kp) + 1, 0);

  Hierarchy::Level root;
  root.star_level = 0;
  root.is_marker = true;
  root.branches.push_back({-1, 0, 0});
  h.levels.push_back(std::move(root));

  for (long k = 1; k <= Kp; ++k) {
    const long n = star->spec.level(k).n;
    const long exp = level_exponent(n, M);
    h.level_exponents[static_cast<std::size_t>(k)] = exp;
    h.markers[static_cast<std::size_t>(k)] = h.markers[static_cast<std::size_t>(k - 1)] + exp;

    const std::size_t parents = star->count(k - 1);
    const std::size_t nn = static_cast<std::size_t>(n);

    if (exp == 1) {
      Hierarchy::Level lvl;
      lvl.star_level = k;
      lvl.is_marker = true;
      lvl.branches.reserve(parents * nn);
      for (std::size_t p = 0; p < parents; ++p)
        for (std::size_t j = 0; j < nn; ++j) {
          const std::int64_t idx = static_cast<std::int64_t>(p * nn + j);
          lvl.branches.push_back({static_cast<std::int64_t>(p), idx, idx});
        }
      h.levels.push_back(std::move(lvl));
      continue;
    }

    // Group-size layers shared by all parents at this level.
    const GroupNode tree = split_block(n, M, exp - 1);
    std::vector<std::vector<std::pair<long, long>>> layers;  // (offset, size) per depth
    layers.push_back({{0, n}});
    for (long d = 1; d <= exp - 1; ++d) {
      std::vector<std::pair<long, long>> layer;
      layer.reserve(layers.back().size() * static_cast<std::size_t>(M));
      // Walk the tree breadth-first by depth.
      std::vector<const GroupNode*> cur{&tree}, next;
      for (long dd = 0; dd < d; ++dd) {
        next.clear();
        for (const GroupNode* g : cur)
          for (const auto& c : g->children) next.push_back(&c);
        std::swap(cur, next);
      }
      for (const GroupNode* g : cur) layer.push_back({g->offset, g->size});
      layers.push_back(std::move(layer));
    }

    for (long d = 1; d <= exp - 1; ++d) {
      Hierarchy::Level lvl;
      lvl.star_level = k;
      lvl.is_marker = false;
      const auto& layer = layers[static_cast<std::size_t>(d)];
      lvl.branches.reserve(parents * layer.size());
      const std::size_t groups_prev = layers[static_cast<std::size_t>(d - 1)].size();
      for (std::size_t p = 0; p < parents; ++p) {
        const std::int64_t base = static_cast<std::int64_t>(p * nn);
        for (std::size_t g = 0; g < layer.size(); ++g) {
          const auto [off, size] = layer[g];
          lvl.branches.push_back({static_cast<std::int64_t>(p * groups_prev + g / M),
                                  base + off, base + off + size - 1});
        }
      }
      h.levels.push_back(std::move(lvl));
    }

    // Marker level: the star intervals themselves, parented by leaf group.
    Hierarchy::Level lvl;
    lvl.star_level = k;
    lvl.is_marker = true;
    lvl.branches.reserve(parents * nn);
    const auto& leaves = layers.back();
    for (std::size_t p = 0; p < parents; ++p) {
      const std::int64_t base = static_cast<std::int64_t>(p * nn);
      for (std::size_t g = 0; g < leaves.size(); ++g) {
        const auto [off, size] = leaves[g];
        for (long j = 0; j < size; ++j)
          lvl.branches.push_back({static_cast<std::int64_t>(p * leaves.size() + g),
                                  base + off + j, base + off + j});
      }
    }
    h.levels.push_back(std::move(lvl));
  }

  // The level-wise length comparability is relied on downstream; a failure
  // here means the input violated its gap-ratio bound.
  for (long m = 0; m <= h.top(); ++m) {
    const auto [mn, mx] = h.length_range_local(m);
    if (mx > 2 * chi * mn)
      throw InvariantViolation(
          "build_hierarchy: length comparability failed at level " + std::to_string(m),
          std::string("{\"level\":") + std::to_string(m) + ",\"min\":\"" + format_rational(mn) +
              "\",\"max\":\"" + format_rational(mx) + "\"}");
  }
  return h;
}

inline Hierarchy build_hierarchy(std::shared_ptr<const StarSystem> star) {
  const Rational chi = derive_chi(star->spec);
  return build_hierarchy(std::move(star), chi);
}

/// The four structural properties, checked exactly:
/// ordered interior-disjoint branches; marker levels equal to the star levels;
/// child counts (at most M^2, exactly M strictly between markers); and
/// level-wise length comparability within 2*chi. Plus nesting and weakly
/// decreasing total length.
inline CheckReport verify_hierarchy(const Hierarchy& h) {
  CheckReport report;
  const long M = h.branch_constant;

  bool order_ok = true, marker_ok = true, count_ok = true, comparable_ok = true;
  bool nest_ok = true, total_ok = true;
  std::string w_order, w_marker, w_count, w_comparable, w_nest, w_total;

  Rational prev_total;
  for (long m = 0; m <= h.top(); ++m) {
    const auto& lvl = h.levels[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i + 1 < lvl.branches.size(); ++i) {
      if (h.branch_interval(m, i).hi > h.branch_interval(m, i + 1).lo && order_ok) {
        order_ok = false;
        w_order = "level " + std::to_string(m) + " index " + std::to_string(i);
      }
    }
    if (lvl.is_marker) {
      for (std::size_t i = 0; i < lvl.branches.size() && marker_ok; ++i) {
        const auto& b = lvl.branches[i];
        if (b.first != b.last || b.first != static_cast<std::int64_t>(i) ||
            !(h.branch_interval(m, i) == h.star->interval(lvl.star_level, i))) {
          marker_ok = false;
          w_marker = "level " + std::to_string(m) + " index " + std::to_string(i);
        }
      }
    }
    if (m >= 1) {
      const auto& prev = h.levels[static_cast<std::size_t>(m - 1)];
      std::vector<long> counts(prev.branches.size(), 0);
      for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
        const auto& b = lvl.branches[i];
        if (b.parent < 0 || b.parent >= static_cast<std::int64_t>(prev.branches.size())) {
          count_ok = false;
          w_count = "level " + std::to_string(m) + " index " + std::to_string(i) + " bad parent";
          break;
        }
        ++counts[static_cast<std::size_t>(b.parent)];
        if (!h.branch_interval(m - 1, static_cast<std::size_t>(b.parent))
                 .contains(h.branch_interval(m, i)) &&
            nest_ok) {
          nest_ok = false;
          w_nest = "level " + std::to_string(m) + " index " + std::to_string(i);
        }
      }
      const bool strictly_between = !lvl.is_marker;
      for (std::size_t p = 0; p < counts.size() && count_ok; ++p) {
        if (counts[p] < 1 || counts[p] > M * M ||
            (strictly_between && counts[p] != M)) {
          count_ok = false;
          w_count = "level " + std::to_string(m) + " parent " + std::to_string(p) + " count " +
                    std::to_string(counts[p]);
        }
      }
    }
    const auto [mn, mx] = h.length_range(m);
    if (mx > 2 * h.chi * mn && comparable_ok) {
      comparable_ok = false;
      w_comparable = "level " + std::to_string(m);
    }
    const Rational total = h.total_length(m);
    if (m >= 1 && total > prev_total && total_ok) {
      total_ok = false;
      w_total = "level " + std::to_string(m);
    }
    prev_total = total;
  }

  report.add("branches_ordered_disjoint", order_ok, w_order);
  report.add("marker_levels_equal_star", marker_ok, w_marker);
  report.add("child_counts", count_ok, w_count);
  report.add("length_comparability", comparable_ok, w_comparable);
  report.add("branch_nesting", nest_ok, w_nest);
  report.add("total_length_decreasing", total_ok, w_total);
  return report;
}

/// Exact per-level totals plus the two-sided bounds: equality at marker
/// levels, and at strictly-between levels the sandwich
/// (1 - 2*chi/M) * prior marker total <= level total <= prior marker total.
struct LevelLengthRow {
  long m = 0;
  bool is_marker = false;
  long k = 0;
  Rational total;
  Rational lower;  // bound that applies at this level
  Rational upper;
  bool ok = true;
};

struct LevelLengthReport {
  std::vector<LevelLengthRow> rows;
  bool all_ok = true;
};

inline LevelLengthReport level_length_report(const Hierarchy& h) {
  LevelLengthReport report;
  const StarSystem& star = *h.star;
  const Rational loss = 1 - 2 * h.chi / h.branch_constant;

  for (long m = 0; m <= h.top(); ++m) {
    const auto& lvl = h.levels[static_cast<std::size_t>(m)];
    LevelLengthRow row;
    row.m = m;
    row.is_marker = lvl.is_marker;
    row.k = lvl.star_level;
    row.total = h.total_length(m);
    if (lvl.is_marker) {
      const Rational expect =
          Rational(star.branch_count(lvl.star_level)) * star.star_len_product(lvl.star_level);
      row.lower = row.upper = expect;
      row.ok = (row.total == expect);
    } else {
      const long prior = lvl.star_level - 1;
      const Rational marker_total =
          Rational(star.branch_count(prior)) * star.star_len_product(prior);
      row.lower = loss * marker_total;
      row.upper = marker_total;
      row.ok = (row.lower <= row.total && row.total <= row.upper);
    }
    if (!row.ok) report.all_ok = false;
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// Child/parent length ratios and gap-to-parent ratios per level, all exact,
/// with their comparability envelopes and the two product bounds on the
/// normalized total length.
struct RatioSequences {
  std::vector<Rational> max_child_ratio;  // index m = 1..top ([0] unused)
  std::vector<Rational> min_child_ratio;
  std::vector<Rational> max_gap_ratio;    // largest interior star gap / shortest branch one level up
  std::vector<Rational> min_gap_ratio;    // smallest interior star gap / longest branch one level up
  std::vector<bool> zero_gap_level;       // interior star gaps all zero at this level
  CheckReport checks;
};

inline RatioSequences ratio_sequences(const Hierarchy& h) {
  RatioSequences rs;
  const long top = h.top();
  rs.max_child_ratio.resize(static_cast<std::size_t>(top) + 1);
  rs.min_child_ratio.resize(static_cast<std::size_t>(top) + 1);
  rs.max_gap_ratio.resize(static_cast<std::size_t>(top) + 1);
  rs.min_gap_ratio.resize(static_cast<std::size_t>(top) + 1);
  rs.zero_gap_level.resize(static_cast<std::size_t>(top) + 1, false);

  const Rational chi2 = h.chi * h.chi;
  const Rational m2 = Rational(h.branch_constant) * h.branch_constant;
  const Rational delta0 = h.star->star_len[0];

  bool child_env_ok = true, gap_env_ok = true, prod1_ok = true, prod2_ok = true;
  std::string w_child, w_gap, w_p1, w_p2;
  Rational prod_child = 1, prod_gap = 1;

  for (long m = 1; m <= top; ++m) {
    const auto& lvl = h.levels[static_cast<std::size_t>(m)];
    Rational rmax, rmin;
    bool first = true;
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      const Rational ratio =
          h.branch_length(m, i) /
          h.branch_length(m - 1, static_cast<std::size_t>(lvl.branches[i].parent));
      if (first) {
        rmax = rmin = ratio;
        first = false;
      } else {
        if (ratio > rmax) rmax = ratio;
        if (ratio < rmin) rmin = ratio;
      }
    }
    rs.max_child_ratio[static_cast<std::size_t>(m)] = rmax;
    rs.min_child_ratio[static_cast<std::size_t>(m)] = rmin;

    const long k = lvl.star_level;
    const auto [len_min, len_max] = h.length_range(m - 1);
    const Rational gap_max = h.star->max_interior_gap(k);
    const Rational gap_min = h.star->min_interior_gap(k);
    rs.max_gap_ratio[static_cast<std::size_t>(m)] = gap_max / len_min;
    rs.min_gap_ratio[static_cast<std::size_t>(m)] = gap_min / len_max;
    rs.zero_gap_level[static_cast<std::size_t>(m)] = (gap_max == 0);

    if (!(rmin <= rmax && rmax <= 4 * chi2 * rmin) && child_env_ok) {
      child_env_ok = false;
      w_child = "level " + std::to_string(m);
    }
    const Rational& gmaxr = rs.max_gap_ratio[static_cast<std::size_t>(m)];
    const Rational& gminr = rs.min_gap_ratio[static_cast<std::size_t>(m)];
    if (!(gminr <= gmaxr && gmaxr <= 2 * chi2 * gminr) && gap_env_ok) {
      gap_env_ok = false;
      w_gap = "level " + std::to_string(m);
    }

    prod_child *= m2 * rmax;
    prod_gap *= (1 - gminr);
    const Rational normalized = h.total_length(m) / delta0;
    if (normalized > prod_child && prod1_ok) {
      prod1_ok = false;
      w_p1 = "level " + std::to_string(m);
    }
    if (normalized > prod_gap && prod2_ok) {
      prod2_ok = false;
      w_p2 = "level " + std::to_string(m);
    }
  }

  rs.checks.add("child_ratio_envelope", child_env_ok, w_child);
  rs.checks.add("gap_ratio_envelope", gap_env_ok, w_gap);
  rs.checks.add("length_below_child_ratio_product", prod1_ok, w_p1);
  rs.checks.add("length_below_gap_product", prod2_ok, w_p2);
  return rs;
}

/// Finite-depth trend table over the pre-marker levels a = m_k - 1: the
/// normalized total length to the power 1/a, the share of levels with small
/// gap ratio, and the partial product over those levels.
struct SubseqRow {
  long k = 0;
  long a = 0;
  double total_norm = 0;       // l(H_a) / delta_0
  double total_pow = 0;        // (l(H_a)/delta_0)^(1/a)
  long small_gap_count = 0;    // #{ j <= a : min_gap_ratio(j) <= eps }
  double small_gap_frac = 0;
  double gap_product_pow = 0;  // (prod over those j of 1 - min_gap_ratio(j)^p)^(1/a)
};

struct SubsequenceReport {
  Rational epsilon;
  double p = 1.0;
  std::vector<SubseqRow> rows;
  long best_index = -1;  // row with the largest total_pow
};

inline SubsequenceReport subsequence_report(const Hierarchy& h, const Rational& epsilon,
                                            double p) {
  if (epsilon <= 0 || epsilon >= 1)
    throw std::invalid_argument("subsequence_report: epsilon must lie in (0,1)");
  if (p <= 0 || p > 1) throw std::invalid_argument("subsequence_report: p must lie in (0,1]");

  const RatioSequences rs = ratio_sequences(h);
  SubsequenceReport report;
  report.epsilon = epsilon;
  report.p = p;
  const Rational delta0 = h.star->star_len[0];

  for (long k = 1; k <= h.star->usable_depth(); ++k) {
    const long a = h.markers[static_cast<std::size_t>(k)] - 1;
    if (a < 1) continue;
    SubseqRow row;
    row.k = k;
    row.a = a;
    row.total_norm = to_double(h.total_length(a) / delta0);
    row.total_pow = std::exp(log_rational(h.total_length(a) / delta0) / static_cast<double>(a));
    double log_prod = 0;
    for (long j = 1; j <= a; ++j) {
      const Rational& g = rs.min_gap_ratio[static_cast<std::size_t>(j)];
      if (g <= epsilon) {
        ++row.small_gap_count;
        const double gp = std::pow(to_double(g), p);
        log_prod += std::log1p(-gp);
      }
    }
    row.small_gap_frac = static_cast<double>(row.small_gap_count) / static_cast<double>(a);
    row.gap_product_pow = std::exp(log_prod / static_cast<double>(a));
    report.rows.push_back(row);
  }
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (report.best_index < 0 ||
        report.rows[i].total_pow > report.rows[static_cast<std::size_t>(report.best_index)].total_pow)
      report.best_index = static_cast<long>(i);
  }
  return report;
}

/// CSV dump: m,branch,left,right,parent,is_marker_level,k.
inline void dump_hierarchy_csv(std::ostream& os, const Hierarchy& h) {
  os << "m,branch,left,right,parent,is_marker_level,k\n";
  for (long m = 0; m <= h.top(); ++m) {
    const auto& lvl = h.levels[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < lvl.branches.size(); ++i) {
      const IntervalR iv = h.branch_interval(m, i);
      os << m << ',' << i << ',' << format_rational(iv.lo) << ',' << format_rational(iv.hi)
         << ',' << lvl.branches[i].parent << ',' << (lvl.is_marker ? 1 : 0) << ','
         << lvl.star_level << '\n';
    }
  }
}

}  // namespace hps
