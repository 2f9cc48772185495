#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hps/errors.hpp"
#include "hps/params.hpp"
#include "hps/qsmaps.hpp"

namespace hps {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
  }
}

inline Rational rational_field(const Json& value, const std::string& context) {
  if (value.is_string()) {
    try {
      return parse_rational(value.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(context + ": " + e.what());
    }
  }
  if (value.is_number_integer()) return Rational(value.get<long long>());
  throw ConfigError(context + ": expected a \"p/q\" string or integer");
}

}  // namespace detail

struct ProbeConfig {
  std::size_t sample_size = 100000;
  std::vector<double> rho = {0.5, 2.0, 6.0};
  std::pair<double, double> window = {0.0, 1.0};
};

struct BallConfig {
  long points = 5;
  long radii_per_point = 5;
};

/// One run: a resolved spec, a map, and all pipeline knobs.
struct RunConfig {
  HPSSpec spec;
  QSMapSpec map = QSMapSpec::identity();
  long depth = 0;  // pipeline truncation depth; 0 = full spec depth
  std::vector<double> d_grid = {0.5, 0.7, 0.9};
  std::vector<Rational> scales;
  Rational epsilon = Rational(1, 10);
  double p = 1.0;
  long window = 0;
  std::uint64_t seed = 1;
  std::string out = "out";
  double tail_threshold = 0.95;
  ProbeConfig probe;
  BallConfig ball;
  Json resolved;  // full resolved config echoed into every report (excludes out)

  long pipeline_depth() const { return depth > 0 ? depth : spec.depth(); }
};

inline QSMapSpec parse_map(const Json& obj) {
  if (!obj.is_object() || !obj.contains("kind"))
    throw ConfigError("map must be an object with a 'kind'");
  const std::string kind = obj.at("kind").get<std::string>();
  try {
    if (kind == "identity") {
      detail::reject_unknown_keys(obj, {"kind"}, "map identity");
      return QSMapSpec::identity();
    }
    if (kind == "affine") {
      detail::reject_unknown_keys(obj, {"kind", "scale", "offset"}, "map affine");
      return QSMapSpec::affine(obj.at("scale").get<double>(),
                               obj.value("offset", 0.0));
    }
    if (kind == "power") {
      detail::reject_unknown_keys(obj, {"kind", "alpha"}, "map power");
      return QSMapSpec::power(obj.at("alpha").get<double>());
    }
    if (kind == "shifted_power") {
      detail::reject_unknown_keys(obj, {"kind", "alpha", "shift"}, "map shifted_power");
      return QSMapSpec::shifted_power(obj.at("alpha").get<double>(),
                                      obj.at("shift").get<double>());
    }
    if (kind == "composition") {
      detail::reject_unknown_keys(obj, {"kind", "components"}, "map composition");
      std::vector<QSMapSpec> components;
      for (const Json& c : obj.at("components")) components.push_back(parse_map(c));
      return QSMapSpec::composition(components);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("map: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("map: ") + e.what());
  }
  throw ConfigError("unknown map kind '" + kind + "'");
}

inline IntervalR parse_interval(const Json& arr, const std::string& context) {
  if (!arr.is_array() || arr.size() != 2)
    throw ConfigError(context + ": expected [\"lo\", \"hi\"]");
  return {detail::rational_field(arr[0], context + " lo"),
          detail::rational_field(arr[1], context + " hi")};
}

inline HPSSpec parse_generator(const Json& obj) {
  detail::reject_unknown_keys(obj, {"kind", "params", "depth", "initial_interval"}, "generator");
  if (!obj.contains("kind") || !obj.contains("depth"))
    throw ConfigError("generator needs 'kind' and 'depth'");
  const std::string kind = obj.at("kind").get<std::string>();
  const long K = obj.at("depth").get<long>();
  IntervalR interval{Rational(0), Rational(1)};
  if (obj.contains("initial_interval"))
    interval = parse_interval(obj.at("initial_interval"), "generator initial_interval");
  const Json params = obj.value("params", Json::object());

  try {
    if (kind == "middle_thirds") {
      detail::reject_unknown_keys(params, {}, "middle_thirds params");
      return make_middle_thirds(K, interval);
    }
    if (kind == "near_full") {
      detail::reject_unknown_keys(params, {}, "near_full params");
      return make_near_full(K, interval);
    }
    if (kind == "uniform_cantor") {
      detail::reject_unknown_keys(params, {"n", "c"}, "uniform_cantor params");
      if (!params.contains("n") || !params.contains("c"))
        throw ConfigError("uniform_cantor needs 'n' and 'c'");
      std::vector<long> n_seq;
      if (params.at("n").is_array())
        for (const Json& v : params.at("n")) n_seq.push_back(v.get<long>());
      else
        n_seq.push_back(params.at("n").get<long>());
      std::vector<Rational> c_seq;
      if (params.at("c").is_array())
        for (const Json& v : params.at("c"))
          c_seq.push_back(detail::rational_field(v, "uniform_cantor c"));
      else
        c_seq.push_back(detail::rational_field(params.at("c"), "uniform_cantor c"));
      return make_uniform_cantor(n_seq, c_seq, K, interval);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
  throw ConfigError("unknown generator kind '" + kind + "'");
}

inline HPSSpec parse_levels(const Json& doc) {
  HPSSpec spec;
  spec.initial_interval = parse_interval(doc.at("initial_interval"), "initial_interval");
  for (const Json& lvl : doc.at("levels")) {
    detail::reject_unknown_keys(lvl, {"n", "c", "gaps"}, "level");
    LevelSpec level;
    level.n = lvl.at("n").get<long>();
    level.c = detail::rational_field(lvl.at("c"), "level c");
    for (const Json& g : lvl.at("gaps"))
      level.gaps.push_back(detail::rational_field(g, "level gap"));
    spec.levels.push_back(std::move(level));
  }
  return spec;
}

inline RunConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  detail::reject_unknown_keys(
      doc,
      {"initial_interval", "levels", "generator", "map", "depth", "d_grid", "scales",
       "epsilon", "p", "window", "seed", "out", "tail_threshold", "probe", "ball"},
      "config");

  RunConfig config;
  const bool has_levels = doc.contains("levels");
  const bool has_generator = doc.contains("generator");
  if (has_levels == has_generator)
    throw ConfigError("config needs exactly one of 'levels' or 'generator'");

  try {
    config.spec = has_levels ? parse_levels(doc) : parse_generator(doc.at("generator"));

    if (doc.contains("map")) config.map = parse_map(doc.at("map"));
    if (doc.contains("depth")) config.depth = doc.at("depth").get<long>();
    if (config.depth < 0 || config.depth > config.spec.depth())
      throw ConfigError("depth must lie in [1, spec depth]");
    if (doc.contains("d_grid")) {
      config.d_grid.clear();
      for (const Json& v : doc.at("d_grid")) config.d_grid.push_back(v.get<double>());
    }
    if (doc.contains("scales")) {
      for (const Json& v : doc.at("scales"))
        config.scales.push_back(detail::rational_field(v, "scales"));
    } else {
      for (int j = 4; j <= 14; ++j)
        config.scales.push_back(Rational(BigInt(1), BigInt(1) << j));
    }
    if (doc.contains("epsilon"))
      config.epsilon = detail::rational_field(doc.at("epsilon"), "epsilon");
    if (doc.contains("p")) config.p = doc.at("p").get<double>();
    if (doc.contains("window")) config.window = doc.at("window").get<long>();
    if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("out")) config.out = doc.at("out").get<std::string>();
    if (doc.contains("tail_threshold"))
      config.tail_threshold = doc.at("tail_threshold").get<double>();

    if (doc.contains("probe")) {
      const Json& probe = doc.at("probe");
      detail::reject_unknown_keys(probe, {"sample_size", "rho", "window"}, "probe");
      if (probe.contains("sample_size"))
        config.probe.sample_size = probe.at("sample_size").get<std::size_t>();
      if (probe.contains("rho")) {
        config.probe.rho.clear();
        for (const Json& v : probe.at("rho")) config.probe.rho.push_back(v.get<double>());
      }
      if (probe.contains("window")) {
        const Json& w = probe.at("window");
        if (!w.is_array() || w.size() != 2) throw ConfigError("probe window must be [lo, hi]");
        config.probe.window = {w[0].get<double>(), w[1].get<double>()};
      }
    }
    if (doc.contains("ball")) {
      const Json& ball = doc.at("ball");
      detail::reject_unknown_keys(ball, {"points", "radii_per_point"}, "ball");
      if (ball.contains("points")) config.ball.points = ball.at("points").get<long>();
      if (ball.contains("radii_per_point"))
        config.ball.radii_per_point = ball.at("radii_per_point").get<long>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Deterministic echo of the resolved run (output location excluded).
  Json resolved;
  if (has_generator) {
    resolved["generator"] = doc.at("generator");
  } else {
    Json levels = Json::array();
    for (const LevelSpec& lvl : config.spec.levels) {
      Json level;
      level["n"] = lvl.n;
      level["c"] = format_rational(lvl.c);
      Json gaps = Json::array();
      for (const Rational& g : lvl.gaps) gaps.push_back(format_rational(g));
      level["gaps"] = gaps;
      levels.push_back(level);
    }
    resolved["initial_interval"] = Json::array({format_rational(config.spec.initial_interval.lo),
                                                format_rational(config.spec.initial_interval.hi)});
    resolved["levels"] = levels;
  }
  resolved["map"] = doc.contains("map") ? doc.at("map") : Json{{"kind", "identity"}};
  resolved["depth"] = config.pipeline_depth();
  resolved["d_grid"] = config.d_grid;
  Json scales = Json::array();
  for (const Rational& s : config.scales) scales.push_back(format_rational(s));
  resolved["scales"] = scales;
  resolved["epsilon"] = format_rational(config.epsilon);
  resolved["p"] = config.p;
  resolved["window"] = config.window;
  resolved["seed"] = config.seed;
  resolved["tail_threshold"] = config.tail_threshold;
  resolved["probe"] = Json{{"sample_size", config.probe.sample_size},
                           {"rho", config.probe.rho},
                           {"window", {config.probe.window.first, config.probe.window.second}}};
  resolved["ball"] =
      Json{{"points", config.ball.points}, {"radii_per_point", config.ball.radii_per_point}};
  config.resolved = std::move(resolved);
  return config;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(doc);
}

}  // namespace hps
