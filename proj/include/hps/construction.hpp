#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hps/check.hpp"
#include "hps/errors.hpp"
#include "hps/interval.hpp"
#include "hps/params.hpp"

namespace hps {

/// The exact level sets E_0..E_K. Every interval at level k has the same
/// length |I0|*c_1..c_k, so a level stores left endpoints plus one length.
struct LevelSet {
  struct Geometry {
    std::vector<Rational> lefts;  // left endpoints, ordered left to right
    Rational len;                 // common interval length at this level
  };

  IntervalR root;
  std::vector<Geometry> levels;  // index k = 0..K

  long depth() const { return static_cast<long>(levels.size()) - 1; }
  std::size_t count(long k) const { return levels[static_cast<std::size_t>(k)].lefts.size(); }

  IntervalR interval(long k, std::size_t i) const {
    const Geometry& g = levels[static_cast<std::size_t>(k)];
    return {g.lefts[i], g.lefts[i] + g.len};
  }

  /// Word of the i-th level-k interval as 1-based child indices "a.b.c".
  std::string word(const HPSSpec& spec, long k, std::size_t i) const {
    if (k == 0) return "";
    std::vector<long> digits(static_cast<std::size_t>(k));
    std::size_t rest = i;
    for (long j = k; j >= 1; --j) {
      const long n = spec.level(j).n;
      digits[static_cast<std::size_t>(j - 1)] = static_cast<long>(rest % n) + 1;
      rest /= n;
    }
    std::string out;
    for (std::size_t j = 0; j < digits.size(); ++j) {
      if (j) out += '.';
      out += std::to_string(digits[j]);
    }
    return out;
  }
};

namespace detail {
inline std::string residual_witness(const std::string& what, const Rational& lhs,
                                    const Rational& rhs) {
  return what + ": " + format_rational(lhs) + " vs " + format_rational(rhs);
}
}  // namespace detail

/// Materialize E_0..E_K with exact endpoints. Throws InvariantViolation when
/// the spec fails validation.
inline LevelSet build_levels(const HPSSpec& spec) {
  const ValidationReport validation = validate_spec(spec);
  if (!validation.ok) {
    std::string summary = "build_levels: spec invalid:";
    for (const auto& v : validation.violations)
      summary += " [level " + std::to_string(v.level) + "] " + v.rule + ";";
    throw InvariantViolation(summary);
  }

  LevelSet set;
  set.root = spec.initial_interval;
  set.levels.resize(static_cast<std::size_t>(spec.depth()) + 1);
  set.levels[0].lefts = {spec.initial_interval.lo};
  set.levels[0].len = spec.initial_interval.length();

  for (long k = 1; k <= spec.depth(); ++k) {
    const LevelSpec& lvl = spec.level(k);
    const auto& parent = set.levels[static_cast<std::size_t>(k - 1)];
    auto& cur = set.levels[static_cast<std::size_t>(k)];
    cur.len = parent.len * lvl.c;

    // Offsets of the n children inside any parent (position independent).
    std::vector<Rational> offsets(static_cast<std::size_t>(lvl.n));
    offsets[0] = lvl.gaps[0];
    for (long j = 1; j < lvl.n; ++j)
      offsets[static_cast<std::size_t>(j)] =
          offsets[static_cast<std::size_t>(j - 1)] + cur.len + lvl.gaps[static_cast<std::size_t>(j)];

    cur.lefts.reserve(parent.lefts.size() * static_cast<std::size_t>(lvl.n));
    for (const Rational& pl : parent.lefts)
      for (const Rational& off : offsets) cur.lefts.push_back(pl + off);
  }
  return set;
}

/// The trimmed reconstruction: every level-k interval loses the next level's
/// end gaps, leaving exactly the hull of its children. Parameters (lengths,
/// ratios, gaps) are derived from the spec alone; the interval view needs a
/// built LevelSet attached.
struct StarSystem {
  HPSSpec spec;
  std::shared_ptr<const LevelSet> base;  // may be null (parameters only)

  std::vector<Rational> star_len;   // delta_k = |I*| at level k, k = 0..K-1
  std::vector<Rational> star_ratio; // c*_k = delta_k/delta_{k-1}, k = 1..K-1 ([0] unused)
  std::vector<std::vector<Rational>> star_gaps;  // xi*_{k,0..n_k}, k = 1..K-1 ([0] unused)
  std::vector<Rational> trim_lo;    // left trim at level k = xi_{k+1,0}
  std::vector<Rational> trim_hi;    // right trim at level k = xi_{k+1,n_{k+1}}

  long usable_depth() const { return static_cast<long>(star_len.size()) - 1; }

  std::size_t count(long k) const {
    std::size_t c = 1;
    for (long j = 1; j <= k; ++j) c *= static_cast<std::size_t>(spec.level(j).n);
    return c;
  }

  BigInt branch_count(long k) const {
    BigInt c = 1;
    for (long j = 1; j <= k; ++j) c *= spec.level(j).n;
    return c;
  }

  IntervalR interval(long k, std::size_t i) const {
    if (!base) throw std::logic_error("star interval view requires built levels");
    const IntervalR iv = base->interval(k, i);
    return {iv.lo + trim_lo[static_cast<std::size_t>(k)],
            iv.hi - trim_hi[static_cast<std::size_t>(k)]};
  }

  IntervalR initial_star() const {
    return {spec.initial_interval.lo + trim_lo[0], spec.initial_interval.hi - trim_hi[0]};
  }

  /// delta_0 * c*_1 ... c*_k, the product route to the level length.
  Rational star_len_product(long k) const {
    Rational r = star_len[0];
    for (long j = 1; j <= k; ++j) r *= star_ratio[static_cast<std::size_t>(j)];
    return r;
  }

  Rational min_interior_gap(long k) const {
    const auto& gaps = star_gaps[static_cast<std::size_t>(k)];
    Rational m = gaps[1];
    for (std::size_t l = 2; l + 1 < gaps.size(); ++l)
      if (gaps[l] < m) m = gaps[l];
    return m;
  }

  Rational max_interior_gap(long k) const {
    const auto& gaps = star_gaps[static_cast<std::size_t>(k)];
    Rational m = gaps[1];
    for (std::size_t l = 2; l + 1 < gaps.size(); ++l)
      if (gaps[l] > m) m = gaps[l];
    return m;
  }
};

/// Parameter-only reconstruction; works at any depth without building trees.
inline StarSystem star_system(const HPSSpec& spec) {
  if (spec.depth() < 2)
    throw std::invalid_argument("star system needs one lookahead level (depth >= 2)");
  const ValidationReport validation = validate_spec(spec);
  if (!validation.ok) throw InvariantViolation("star_system: spec invalid");

  StarSystem star;
  star.spec = spec;
  const long K = spec.depth();

  star.star_len.resize(static_cast<std::size_t>(K));
  star.trim_lo.resize(static_cast<std::size_t>(K));
  star.trim_hi.resize(static_cast<std::size_t>(K));
  star.star_ratio.resize(static_cast<std::size_t>(K));
  star.star_gaps.resize(static_cast<std::size_t>(K));

  Rational basic_len = spec.initial_interval.length();  // |I0| c_1..c_k, k = 0 here
  for (long k = 0; k <= K - 1; ++k) {
    const LevelSpec& next = spec.level(k + 1);
    star.trim_lo[static_cast<std::size_t>(k)] = next.gaps.front();
    star.trim_hi[static_cast<std::size_t>(k)] = next.gaps.back();
    star.star_len[static_cast<std::size_t>(k)] =
        basic_len - next.gaps.front() - next.gaps.back();
    if (k >= 1) {
      star.star_ratio[static_cast<std::size_t>(k)] =
          star.star_len[static_cast<std::size_t>(k)] / star.star_len[static_cast<std::size_t>(k - 1)];
      const LevelSpec& cur = spec.level(k);
      auto& gaps = star.star_gaps[static_cast<std::size_t>(k)];
      gaps.resize(static_cast<std::size_t>(cur.n) + 1);
      gaps.front() = next.gaps.front();
      gaps.back() = next.gaps.back();
      const Rational ends = next.gaps.front() + next.gaps.back();
      for (long l = 1; l <= cur.n - 1; ++l)
        gaps[static_cast<std::size_t>(l)] = cur.gaps[static_cast<std::size_t>(l)] + ends;
    }
    basic_len *= next.c;
  }
  return star;
}

inline StarSystem star_system(const HPSSpec& spec, std::shared_ptr<const LevelSet> levels) {
  if (levels && levels->depth() != spec.depth())
    throw std::invalid_argument("star_system: level set depth does not match spec");
  StarSystem star = star_system(spec);
  star.base = std::move(levels);
  return star;
}

/// All construction identities, checked exactly on the built tree.
inline CheckReport verify_levels(const HPSSpec& spec, const LevelSet& set) {
  CheckReport report;
  bool root_ok = set.interval(0, 0) == spec.initial_interval;
  report.add("root_interval", root_ok);

  bool length_ok = true, nesting_ok = true, gaps_ok = true, order_ok = true;
  std::string w_len, w_nest, w_gap, w_order;

  Rational expect_len = spec.initial_interval.length();
  for (long k = 1; k <= set.depth(); ++k) {
    const LevelSpec& lvl = spec.level(k);
    expect_len *= lvl.c;
    const auto& geom = set.levels[static_cast<std::size_t>(k)];
    if (geom.len != expect_len && length_ok) {
      length_ok = false;
      w_len = detail::residual_witness("level " + std::to_string(k), geom.len, expect_len);
    }
    const std::size_t n = static_cast<std::size_t>(lvl.n);
    for (std::size_t p = 0; p < set.count(k - 1); ++p) {
      const IntervalR parent = set.interval(k - 1, p);
      for (std::size_t j = 0; j < n; ++j) {
        const IntervalR child = set.interval(k, p * n + j);
        if (!parent.contains(child) && nesting_ok) {
          nesting_ok = false;
          w_nest = "level " + std::to_string(k) + " child " + std::to_string(p * n + j);
        }
        const Rational gap = (j == 0) ? child.lo - parent.lo
                                      : child.lo - set.interval(k, p * n + j - 1).hi;
        if (gap != lvl.gaps[j] && gaps_ok) {
          gaps_ok = false;
          w_gap = detail::residual_witness(
              "level " + std::to_string(k) + " gap " + std::to_string(j), gap, lvl.gaps[j]);
        }
        if (j + 1 == n) {
          const Rational end = parent.hi - child.hi;
          if (end != lvl.gaps[n] && gaps_ok) {
            gaps_ok = false;
            w_gap = detail::residual_witness("level " + std::to_string(k) + " end gap",
                                             end, lvl.gaps[n]);
          }
        }
      }
    }
    for (std::size_t i = 0; i + 1 < set.count(k); ++i) {
      if (set.interval(k, i).hi > set.interval(k, i + 1).lo && order_ok) {
        order_ok = false;
        w_order = "level " + std::to_string(k) + " index " + std::to_string(i);
      }
    }
  }
  report.add("child_length_ratio", length_ok, w_len);
  report.add("child_in_parent", nesting_ok, w_nest);
  report.add("gap_positions", gaps_ok, w_gap);
  report.add("level_ordering", order_ok, w_order);
  return report;
}

/// End-trim, length and gap identities of the reconstruction, plus the two
/// gap inequalities (end gaps below the smallest interior gap; interior gaps
/// comparable within chi).
inline CheckReport verify_star(const HPSSpec& spec, const StarSystem& star, const Rational& chi) {
  CheckReport report;
  const long Kp = star.usable_depth();

  // (A)-style trims and length identity on the interval view.
  if (star.base) {
    bool trims_ok = true, hull_ok = true, sandwich_ok = true, equal_len_ok = true;
    std::string w_trim, w_hull, w_sandwich, w_len;
    for (long k = 0; k <= Kp; ++k) {
      const LevelSpec& next = spec.level(k + 1);
      const std::size_t n = static_cast<std::size_t>(next.n);
      for (std::size_t i = 0; i < star.count(k); ++i) {
        const IntervalR basic = star.base->interval(k, i);
        const IntervalR trimmed = star.interval(k, i);
        if ((trimmed.lo - basic.lo != next.gaps.front() ||
             basic.hi - trimmed.hi != next.gaps.back()) &&
            trims_ok) {
          trims_ok = false;
          w_trim = "level " + std::to_string(k) + " index " + std::to_string(i);
        }
        if (trimmed.length() != star.star_len[static_cast<std::size_t>(k)] && equal_len_ok) {
          equal_len_ok = false;
          w_len = detail::residual_witness("level " + std::to_string(k), trimmed.length(),
                                           star.star_len[static_cast<std::size_t>(k)]);
        }
        if (k + 1 <= star.base->depth()) {
          const IntervalR first_child = star.base->interval(k + 1, i * n);
          const IntervalR last_child = star.base->interval(k + 1, i * n + n - 1);
          if ((trimmed.lo != first_child.lo || trimmed.hi != last_child.hi) && hull_ok) {
            hull_ok = false;
            w_hull = "level " + std::to_string(k) + " index " + std::to_string(i);
          }
        }
        if (!(basic.contains(trimmed)) && sandwich_ok) {
          sandwich_ok = false;
          w_sandwich = "level " + std::to_string(k) + " index " + std::to_string(i);
        }
      }
    }
    report.add("end_trims", trims_ok, w_trim);
    report.add("equal_star_lengths", equal_len_ok, w_len);
    report.add("star_is_child_hull", hull_ok, w_hull);
    report.add("star_inside_basic", sandwich_ok, w_sandwich);
  }

  // Length identity: delta_k = sum of interior gaps of level k+1 plus
  // |I0| c_1..c_{k+1} n_{k+1}.
  bool len_id_ok = true;
  std::string w_lenid;
  Rational basic_len = spec.initial_interval.length();
  for (long k = 0; k <= Kp; ++k) {
    const LevelSpec& next = spec.level(k + 1);
    basic_len *= next.c;  // now |I0| c_1..c_{k+1}
    Rational interior_sum = 0;
    for (long l = 1; l <= next.n - 1; ++l) interior_sum += next.gaps[static_cast<std::size_t>(l)];
    const Rational expect = interior_sum + basic_len * next.n;
    if (star.star_len[static_cast<std::size_t>(k)] != expect && len_id_ok) {
      len_id_ok = false;
      w_lenid = detail::residual_witness("level " + std::to_string(k),
                                         star.star_len[static_cast<std::size_t>(k)], expect);
    }
  }
  report.add("star_length_identity", len_id_ok, w_lenid);

  // Ratio and gap identities, and the two gap inequalities.
  bool ratio_ok = true, gap_id_ok = true, rs1_ok = true, rs2_ok = true;
  std::string w_ratio, w_gapid, w_rs1, w_rs2;
  for (long k = 1; k <= Kp; ++k) {
    if (star.star_ratio[static_cast<std::size_t>(k)] * star.star_len[static_cast<std::size_t>(k - 1)] !=
            star.star_len[static_cast<std::size_t>(k)] &&
        ratio_ok) {
      ratio_ok = false;
      w_ratio = "level " + std::to_string(k);
    }
    const LevelSpec& cur = spec.level(k);
    const LevelSpec& next = spec.level(k + 1);
    const auto& gaps = star.star_gaps[static_cast<std::size_t>(k)];
    const Rational ends = next.gaps.front() + next.gaps.back();
    if ((gaps.front() != next.gaps.front() || gaps.back() != next.gaps.back()) && gap_id_ok) {
      gap_id_ok = false;
      w_gapid = "level " + std::to_string(k) + " (ends)";
    }
    for (long l = 1; l <= cur.n - 1 && gap_id_ok; ++l) {
      if (gaps[static_cast<std::size_t>(l)] != cur.gaps[static_cast<std::size_t>(l)] + ends) {
        gap_id_ok = false;
        w_gapid = "level " + std::to_string(k) + " interior " + std::to_string(l);
      }
    }
    const Rational gmin = star.min_interior_gap(k);
    const Rational gmax = star.max_interior_gap(k);
    if (gaps.front() + gaps.back() > gmin && rs1_ok) {
      rs1_ok = false;
      w_rs1 = detail::residual_witness("level " + std::to_string(k),
                                       gaps.front() + gaps.back(), gmin);
    }
    if (gmax > chi * gmin && rs2_ok) {
      rs2_ok = false;
      w_rs2 = detail::residual_witness("level " + std::to_string(k), gmax, chi * gmin);
    }
  }
  report.add("star_ratio_identity", ratio_ok, w_ratio);
  report.add("star_gap_identity", gap_id_ok, w_gapid);
  report.add("end_gaps_below_min_interior", rs1_ok, w_rs1);
  report.add("interior_gaps_within_chi", rs2_ok, w_rs2);
  return report;
}

/// CSV dump: level,word,left,right,star. Star rows (when a star system is
/// given) carry star=1 and the trimmed endpoints.
inline void dump_intervals_csv(std::ostream& os, const HPSSpec& spec, const LevelSet& set,
                               const StarSystem* star) {
  os << "level,word,left,right,star\n";
  for (long k = 0; k <= set.depth(); ++k) {
    for (std::size_t i = 0; i < set.count(k); ++i) {
      const IntervalR iv = set.interval(k, i);
      os << k << ',' << set.word(spec, k, i) << ',' << format_rational(iv.lo) << ','
         << format_rational(iv.hi) << ",0\n";
    }
  }
  if (star && star->base) {
    for (long k = 0; k <= star->usable_depth(); ++k) {
      for (std::size_t i = 0; i < star->count(k); ++i) {
        const IntervalR iv = star->interval(k, i);
        os << k << ',' << set.word(spec, k, i) << ',' << format_rational(iv.lo) << ','
           << format_rational(iv.hi) << ",1\n";
      }
    }
  }
}

}  // namespace hps
