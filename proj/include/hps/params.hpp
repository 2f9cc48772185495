#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hps/errors.hpp"
#include "hps/interval.hpp"
#include "hps/rational.hpp"

namespace hps {

/// Per-level generating data: branch count n, contraction ratio c, and the
/// n+1 absolute gap lengths (left end, n-1 interior, right end).
struct LevelSpec {
  long n = 0;
  Rational c;
  std::vector<Rational> gaps;

  long interior_count() const { return n - 1; }
};

/// Generating data of a nested-interval construction, truncated at finite depth.
/// Plain data; nothing is enforced at construction. validate_spec reports all
/// violations as data.
struct HPSSpec {
  IntervalR initial_interval;
  std::vector<LevelSpec> levels;  // level k is levels[k-1]

  long depth() const { return static_cast<long>(levels.size()); }
  const LevelSpec& level(long k) const { return levels.at(static_cast<std::size_t>(k - 1)); }
};

struct Violation {
  long level = 0;  // 0 = spec-wide, otherwise 1-based level index
  std::string rule;
  std::string detail;
  std::vector<std::pair<std::string, std::string>> quantities;  // name -> exact "p/q"
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
};

/// Length of any level-k parent interval: |I0| * c_1 ... c_{k-1}.
inline Rational level_parent_length(const HPSSpec& spec, long k) {
  Rational len = spec.initial_interval.length();
  for (long j = 1; j < k; ++j) len *= spec.level(j).c;
  return len;
}

inline ValidationReport validate_spec(const HPSSpec& spec) {
  ValidationReport report;
  auto flag = [&](long level, std::string rule, std::string detail,
                  std::vector<std::pair<std::string, std::string>> qs = {}) {
    report.ok = false;
    report.violations.push_back({level, std::move(rule), std::move(detail), std::move(qs)});
  };

  if (spec.initial_interval.length() <= 0) {
    flag(0, "nondegenerate_interval", "initial interval must have positive length",
         {{"length", format_rational(spec.initial_interval.length())}});
  }
  if (spec.levels.empty()) {
    flag(0, "depth_min", "at least one level required");
    return report;
  }

  Rational parent_len = spec.initial_interval.length();
  for (long k = 1; k <= spec.depth(); ++k) {
    const LevelSpec& lvl = spec.level(k);
    bool level_usable = true;

    if (lvl.n < 2) {
      flag(k, "branch_count", "branch count must be at least 2",
           {{"n", std::to_string(lvl.n) + "/1"}});
      level_usable = false;
    }
    if (lvl.c <= 0 || lvl.c >= 1) {
      flag(k, "contraction_range", "contraction ratio must lie in (0,1)",
           {{"c", format_rational(lvl.c)}});
      level_usable = false;
    }
    if (level_usable && Rational(lvl.n) * lvl.c >= 1) {
      flag(k, "nc_product", "n*c >= 1",
           {{"n*c", format_rational(Rational(lvl.n) * lvl.c)}});
      level_usable = false;
    }
    if (static_cast<long>(lvl.gaps.size()) != lvl.n + 1) {
      flag(k, "gap_count", "expected n+1 gap entries",
           {{"given", std::to_string(lvl.gaps.size()) + "/1"},
            {"expected", std::to_string(lvl.n + 1) + "/1"}});
      level_usable = false;
    }
    if (level_usable) {
      Rational gap_sum = 0;
      bool nonneg = true;
      for (const Rational& g : lvl.gaps) {
        if (g < 0) nonneg = false;
        gap_sum += g;
      }
      if (!nonneg) flag(k, "gap_nonneg", "gap lengths must be nonnegative");

      // Children of length c*|parent| with position-independent gaps force
      // the total gap length to equal |parent|*(1 - n*c) exactly.
      const Rational required = parent_len * (1 - Rational(lvl.n) * lvl.c);
      if (gap_sum != required) {
        flag(k, "gap_sum", "gap lengths do not fill the parent interval",
             {{"sum", format_rational(gap_sum)},
              {"required", format_rational(required)},
              {"residual", format_rational(gap_sum - required)}});
      }

      bool any_zero = false, any_pos = false;
      for (long l = 1; l <= lvl.n - 1; ++l) {
        const Rational& g = lvl.gaps[static_cast<std::size_t>(l)];
        (g == 0 ? any_zero : any_pos) = true;
      }
      if (any_zero && any_pos) {
        flag(k, "interior_gap_mix",
             "interior gaps must be all zero or all positive (gap-ratio bound undefined)");
      }
    }
    parent_len *= lvl.c;
  }
  return report;
}

/// Zero end gaps, equal interior gaps at every level.
inline HPSSpec make_uniform_cantor(const std::vector<long>& n_seq,
                                   const std::vector<Rational>& c_seq, long K,
                                   IntervalR initial_interval = {Rational(0), Rational(1)}) {
  if (K < 1) throw std::invalid_argument("make_uniform_cantor: depth must be >= 1");
  auto pick = [K](const auto& seq, long k) -> const auto& {
    if (static_cast<long>(seq.size()) == 1) return seq[0];
    if (static_cast<long>(seq.size()) != K)
      throw std::invalid_argument("make_uniform_cantor: sequence length must be 1 or depth");
    return seq[static_cast<std::size_t>(k - 1)];
  };

  HPSSpec spec;
  spec.initial_interval = initial_interval;
  Rational parent_len = initial_interval.length();
  for (long k = 1; k <= K; ++k) {
    const long n = pick(n_seq, k);
    const Rational& c = pick(c_seq, k);
    if (n < 2) throw std::invalid_argument("make_uniform_cantor: n must be >= 2");
    if (c <= 0 || Rational(n) * c >= 1)
      throw std::invalid_argument("make_uniform_cantor: need 0 < c and n*c < 1");

    LevelSpec lvl;
    lvl.n = n;
    lvl.c = c;
    const Rational interior = parent_len * (1 - Rational(n) * c) / (n - 1);
    lvl.gaps.assign(static_cast<std::size_t>(n + 1), interior);
    lvl.gaps.front() = 0;
    lvl.gaps.back() = 0;
    spec.levels.push_back(std::move(lvl));
    parent_len *= c;
  }
  return spec;
}

inline HPSSpec make_middle_thirds(long K,
                                  IntervalR initial_interval = {Rational(0), Rational(1)}) {
  return make_uniform_cantor({2}, {Rational(1, 3)}, K, initial_interval);
}

/// Two branches per level with c_k = (1 - (k+1)^-2)/2: the total-length product
/// converges, so the dimension-formula sequence climbs toward 1.
inline HPSSpec make_near_full(long K,
                              IntervalR initial_interval = {Rational(0), Rational(1)}) {
  if (K < 1) throw std::invalid_argument("make_near_full: depth must be >= 1");
  std::vector<long> n_seq(static_cast<std::size_t>(K), 2);
  std::vector<Rational> c_seq;
  c_seq.reserve(static_cast<std::size_t>(K));
  for (long k = 1; k <= K; ++k) {
    // (1 - (k+1)^-2)/2 = k(k+2) / (2(k+1)^2)
    c_seq.emplace_back(BigInt(k) * (k + 2), BigInt(2) * (k + 1) * (k + 1));
  }
  return make_uniform_cantor(n_seq, c_seq, K, initial_interval);
}

/// Largest interior-gap ratio max/min over levels with positive interior gaps,
/// floored at 1. Levels whose interior gaps are all zero contribute nothing.
inline Rational derive_chi(const HPSSpec& spec) {
  Rational chi = 1;
  for (long k = 1; k <= spec.depth(); ++k) {
    const LevelSpec& lvl = spec.level(k);
    if (static_cast<long>(lvl.gaps.size()) != lvl.n + 1)
      throw std::invalid_argument("derive_chi: malformed gap list at level " + std::to_string(k));
    Rational gmin, gmax;
    bool first = true;
    for (long l = 1; l <= lvl.n - 1; ++l) {
      const Rational& g = lvl.gaps[static_cast<std::size_t>(l)];
      if (first) {
        gmin = gmax = g;
        first = false;
      } else {
        if (g < gmin) gmin = g;
        if (g > gmax) gmax = g;
      }
    }
    if (first) continue;  // n == 1 cannot happen for valid specs
    if (gmin == 0 && gmax == 0) continue;
    if (gmin == 0)
      throw std::invalid_argument("chi undefined at level " + std::to_string(k) +
                                  ": mixed zero/positive interior gaps");
    const Rational ratio = gmax / gmin;
    if (ratio > chi) chi = ratio;
  }
  return chi;
}

/// First K levels of a deeper spec.
inline HPSSpec truncate_spec(const HPSSpec& spec, long K) {
  if (K < 1 || K > spec.depth())
    throw std::invalid_argument("truncate_spec: depth out of range");
  HPSSpec out;
  out.initial_interval = spec.initial_interval;
  out.levels.assign(spec.levels.begin(), spec.levels.begin() + K);
  return out;
}

}  // namespace hps
