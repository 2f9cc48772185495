#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hps/errors.hpp"
#include "hps/hierarchy.hpp"

namespace hps {

/// An increasing homeomorphism of the line from a small catalog: identity,
/// affine, odd power, shifted odd power, and left-to-right compositions.
class QSMapSpec {
 public:
  enum class Kind { Identity, Affine, Power, ShiftedPower };

  struct Node {
    Kind kind = Kind::Identity;
    double a = 0;  // scale or exponent
    double b = 0;  // offset or shift
  };

  static QSMapSpec identity() { return QSMapSpec({Node{Kind::Identity, 0, 0}}); }

  static QSMapSpec affine(double scale, double offset) {
    if (!(scale > 0)) throw std::invalid_argument("affine map needs scale > 0");
    return QSMapSpec({Node{Kind::Affine, scale, offset}});
  }

  /// x -> sign(x) |x|^alpha
  static QSMapSpec power(double alpha) {
    if (!(alpha > 0)) throw std::invalid_argument("power map needs alpha > 0");
    return QSMapSpec({Node{Kind::Power, alpha, 0}});
  }

  /// x -> h(x + s) - h(s) with h the odd power map.
  static QSMapSpec shifted_power(double alpha, double shift) {
    if (!(alpha > 0)) throw std::invalid_argument("shifted power map needs alpha > 0");
    return QSMapSpec({Node{Kind::ShiftedPower, alpha, shift}});
  }

  /// Components applied left to right.
  static QSMapSpec composition(const std::vector<QSMapSpec>& components) {
    if (components.empty()) throw std::invalid_argument("composition needs components");
    std::vector<Node> chain;
    for (const auto& c : components)
      chain.insert(chain.end(), c.chain_.begin(), c.chain_.end());
    return QSMapSpec(std::move(chain));
  }

  double operator()(double x) const {
    for (const Node& node : chain_) x = eval_node(node, x);
    return x;
  }

  double inverse(double y) const {
    for (auto it = chain_.rbegin(); it != chain_.rend(); ++it) y = invert_node(*it, y);
    return y;
  }

  const std::vector<Node>& chain() const { return chain_; }

  bool is_identity() const {
    for (const Node& node : chain_)
      if (node.kind != Kind::Identity) return false;
    return true;
  }

  /// Exponent for the modulus envelope C * max(t^theta, t^(1/theta)):
  /// the product of the power exponents along the chain.
  double envelope_exponent() const {
    double theta = 1.0;
    for (const Node& node : chain_)
      if (node.kind == Kind::Power || node.kind == Kind::ShiftedPower) theta *= node.a;
    return theta;
  }

  std::string describe() const {
    std::string out;
    for (std::size_t i = 0; i < chain_.size(); ++i) {
      if (i) out += " ∘ ";
      const Node& node = chain_[i];
      switch (node.kind) {
        case Kind::Identity: out += "identity"; break;
        case Kind::Affine:
          out += "affine(" + std::to_string(node.a) + "," + std::to_string(node.b) + ")";
          break;
        case Kind::Power: out += "power(" + std::to_string(node.a) + ")"; break;
        case Kind::ShiftedPower:
          out += "shifted_power(" + std::to_string(node.a) + "," + std::to_string(node.b) + ")";
          break;
      }
    }
    return out;
  }

 private:
  explicit QSMapSpec(std::vector<Node> chain) : chain_(std::move(chain)) {}

  static double odd_pow(double x, double alpha) {
    return std::copysign(std::pow(std::fabs(x), alpha), x);
  }

  static double eval_node(const Node& node, double x) {
    switch (node.kind) {
      case Kind::Identity: return x;
      case Kind::Affine: return node.a * x + node.b;
      case Kind::Power: return odd_pow(x, node.a);
      case Kind::ShiftedPower: return odd_pow(x + node.b, node.a) - odd_pow(node.b, node.a);
    }
    return x;
  }

  static double invert_node(const Node& node, double y) {
    switch (node.kind) {
      case Kind::Identity: return y;
      case Kind::Affine: return (y - node.b) / node.a;
      case Kind::Power: return odd_pow(y, 1.0 / node.a);
      case Kind::ShiftedPower:
        return odd_pow(y + odd_pow(node.b, node.a), 1.0 / node.a) - node.b;
    }
    return y;
  }

  std::vector<Node> chain_;
};

inline double eval_map(const QSMapSpec& map, double x) { return map(x); }

/// A hierarchy pushed through a map: same level/parent structure, endpoint
/// images in double precision. Keeps the source and the map so scans can
/// work with preimages.
struct ImageHierarchy {
  struct Branch {
    double lo = 0;
    double hi = 0;
    std::int64_t parent = -1;
  };

  struct Level {
    long star_level = 0;
    bool is_marker = false;
    std::vector<Branch> branches;
  };

  QSMapSpec map = QSMapSpec::identity();
  std::shared_ptr<const Hierarchy> source;
  std::vector<Level> levels;

  long top() const { return static_cast<long>(levels.size()) - 1; }
};

inline ImageHierarchy push_hierarchy(const QSMapSpec& map,
                                     std::shared_ptr<const Hierarchy> source) {
  if (!source) throw std::invalid_argument("push_hierarchy: missing hierarchy");
  ImageHierarchy image;
  image.map = map;
  image.source = source;
  image.levels.resize(source->levels.size());
  for (long m = 0; m <= source->top(); ++m) {
    const auto& src = source->levels[static_cast<std::size_t>(m)];
    auto& dst = image.levels[static_cast<std::size_t>(m)];
    dst.star_level = src.star_level;
    dst.is_marker = src.is_marker;
    dst.branches.resize(src.branches.size());
    for (std::size_t i = 0; i < src.branches.size(); ++i) {
      const IntervalR iv = source->branch_interval(m, i);
      dst.branches[i] = {map(to_double(iv.lo)), map(to_double(iv.hi)), src.branches[i].parent};
    }
  }
  return image;
}

/// Empirical distortion data for one map over one sampling window: power
/// envelopes for nested-interval length ratios, concentric expansion factors,
/// and a three-point modulus profile.
struct DistortionEnvelope {
  double p = 1;     // upper envelope 4 t^p
  double q = 1;     // lower envelope beta t^q
  double beta = 1;
  std::map<double, double> K_rho;  // rho -> max |f(rho I)| / |f(I)|
  std::vector<std::pair<double, double>> eta_profile;  // (t, max three-point ratio)
  double eta_theta = 1;
  double eta_C = 0;  // empirical constant for C * max(t^theta, t^(1/theta))
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  std::pair<double, double> window{0, 1};
  std::vector<std::pair<double, double>> samples_log;  // (log t, log ratio), not serialized
};

inline DistortionEnvelope distortion_probe(const QSMapSpec& map, std::size_t sample_size,
                                           const std::vector<double>& rho_list,
                                           std::uint64_t seed,
                                           std::pair<double, double> window = {0.0, 1.0}) {
  if (sample_size < 1000)
    throw std::invalid_argument("distortion_probe: sample_size must be >= 1000");
  const double w_lo = window.first, w_hi = window.second;
  if (!(w_hi > w_lo)) throw std::invalid_argument("distortion_probe: degenerate window");
  const double w_len = w_hi - w_lo;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return lo * std::exp(unit(rng) * std::log(hi / lo));
  };

  DistortionEnvelope env;
  env.sample_size = sample_size;
  env.seed = seed;
  env.window = window;
  env.eta_theta = map.envelope_exponent();

  // Nested interval pairs. Positions are sampled log-uniformly toward the
  // window edges so singular endpoints drive the envelopes.
  double min_upper_slope = std::numeric_limits<double>::infinity();
  double max_lower_slope = 1.0;
  std::vector<std::pair<double, double>> samples;  // (log t, log ratio)
  samples.reserve(sample_size);
  for (std::size_t s = 0; s < sample_size; ++s) {
    const double len = log_uniform(1e-6, 1.0) * w_len;
    const double slack = w_len - len;
    double offset = (slack > 0) ? log_uniform(1e-9, 1.0) * slack : 0.0;
    if (unit(rng) < 0.5) offset = slack - offset;  // mirror: anchor near either edge
    const double lo = w_lo + offset, hi = lo + len;

    const double t = std::exp(std::log(1e-4) * unit(rng)) * 0.99;  // ratio in (1e-4, 0.99]
    const double sub_len = t * len;
    const double sub_slack = len - sub_len;
    double sub_off = (sub_slack > 0) ? log_uniform(1e-9, 1.0) * sub_slack : 0.0;
    if (unit(rng) < 0.5) sub_off = sub_slack - sub_off;
    const double sub_lo = lo + sub_off, sub_hi = sub_lo + sub_len;

    const double big = map(hi) - map(lo);
    const double small = map(sub_hi) - map(sub_lo);
    if (!(big > 0) || !(small > 0)) continue;
    const double t_eff = (sub_hi - sub_lo) / (hi - lo);
    if (!(t_eff > 0) || t_eff >= 1) continue;
    const double ratio = small / big;
    const double log_t = std::log(t_eff), log_r = std::log(ratio);
    samples.push_back({log_t, log_r});
    min_upper_slope = std::min(min_upper_slope, (log_r - std::log(4.0)) / log_t);
    if (log_r < 0) max_lower_slope = std::max(max_lower_slope, log_r / log_t);
  }

  env.p = std::min(1.0, min_upper_slope);
  env.q = max_lower_slope;
  double log_beta = 0.0;
  for (const auto& [log_t, log_r] : samples)
    log_beta = std::min(log_beta, log_r - env.q * log_t);
  env.beta = std::exp(log_beta);
  env.samples_log = std::move(samples);

  // Concentric expansion: rho I has the same center and rho times the length.
  for (double rho : rho_list) {
    if (!(rho > 0)) throw std::invalid_argument("distortion_probe: rho must be positive");
    double worst = 0;
    std::mt19937_64 rho_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t s = 0; s < sample_size / 4 + 1000; ++s) {
      const double len = 1e-6 * std::exp(u(rho_rng) * std::log(1e6)) * w_len;
      const double slack = w_len - len;
      const double lo = w_lo + u(rho_rng) * std::max(slack, 0.0);
      const double c = lo + len / 2;
      const double denom = map(lo + len) - map(lo);
      if (!(denom > 0)) continue;
      const double half = rho * len / 2;
      const double ratio = (map(c + half) - map(c - half)) / denom;
      worst = std::max(worst, ratio);
    }
    env.K_rho[rho] = worst;
  }

  // Three-point modulus profile, bucketed on a log grid of t. Each bucket
  // records the worst ratio seen together with the t where it occurred.
  constexpr int kBuckets = 24;
  const double t_min = 1e-3, t_max = 1e3;
  std::vector<std::pair<double, double>> bucket_max(kBuckets, {0.0, 0.0});  // (t, ratio)
  double eta_C = 0;
  std::mt19937_64 tri_rng(seed ^ 0xda942042e4dd58b5ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t s = 0; s < sample_size; ++s) {
    const double x = w_lo + u(tri_rng) * w_len;
    const double da = (u(tri_rng) < 0.5 ? -1 : 1) * 1e-6 * std::exp(u(tri_rng) * std::log(1e6)) * w_len;
    const double db = (u(tri_rng) < 0.5 ? -1 : 1) * 1e-6 * std::exp(u(tri_rng) * std::log(1e6)) * w_len;
    const double a = x + da, b = x + db;
    const double dfb = std::fabs(map(x) - map(b));
    if (!(dfb > 0) || a == b) continue;
    const double t = std::fabs(x - a) / std::fabs(x - b);
    if (!(t > 0) || !std::isfinite(t)) continue;
    const double ratio = std::fabs(map(x) - map(a)) / dfb;
    if (t >= t_min && t <= t_max) {
      const int bucket = std::min(
          kBuckets - 1,
          static_cast<int>(std::log(t / t_min) / std::log(t_max / t_min) * kBuckets));
      auto& worst = bucket_max[static_cast<std::size_t>(bucket)];
      if (ratio > worst.second) worst = {t, ratio};
    }
    const double envelope =
        std::max(std::pow(t, env.eta_theta), std::pow(t, 1.0 / env.eta_theta));
    if (envelope > 0 && std::isfinite(envelope)) eta_C = std::max(eta_C, ratio / envelope);
  }
  for (const auto& worst : bucket_max)
    if (worst.second > 0) env.eta_profile.push_back(worst);
  env.eta_C = eta_C;
  return env;
}

}  // namespace hps
