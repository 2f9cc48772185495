#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hps/config.hpp"
#include "hps/dimension.hpp"
#include "hps/version.hpp"

namespace hps {
namespace cli {

inline Json to_json(const ValidationReport& report) {
  Json out;
  out["ok"] = report.ok;
  Json violations = Json::array();
  for (const Violation& v : report.violations) {
    Json item;
    item["level"] = v.level;
    item["rule"] = v.rule;
    item["detail"] = v.detail;
    Json quantities;
    for (const auto& [name, value] : v.quantities) quantities[name] = value;
    item["quantities"] = quantities;
    violations.push_back(item);
  }
  out["violations"] = violations;
  return out;
}

inline Json to_json(const CheckReport& report) {
  Json out;
  out["ok"] = report.all_ok();
  Json items = Json::array();
  for (const CheckItem& item : report.items) {
    Json entry;
    entry["name"] = item.name;
    entry["ok"] = item.ok;
    if (!item.ok) entry["witness"] = item.witness;
    items.push_back(entry);
  }
  out["checks"] = items;
  return out;
}

inline Json to_json(const FormulaReport& report) {
  Json out;
  out["values"] = report.values;
  out["tail"] = report.tail;
  out["window"] = report.window;
  out["chi_ok"] = report.chi_ok;
  out["normalization"] = report.normalization;
  return out;
}

inline Json to_json(const BoxReport& report) {
  Json out;
  Json rows = Json::array();
  for (const BoxRow& row : report.rows) rows.push_back(Json{{"scale", row.scale}, {"count", row.count}});
  out["rows"] = rows;
  out["slope"] = report.slope;
  out["residual"] = report.residual;
  out["window_slopes"] = report.window_slopes;
  return out;
}

inline Json to_json(const DistortionEnvelope& env) {
  Json out;
  out["p"] = env.p;
  out["q"] = env.q;
  out["beta"] = env.beta;
  Json k;
  for (const auto& [rho, value] : env.K_rho) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", rho);
    k[key] = value;
  }
  out["K"] = k;
  Json profile = Json::array();
  for (const auto& [t, ratio] : env.eta_profile) profile.push_back(Json::array({t, ratio}));
  out["eta_profile"] = profile;
  out["eta_theta"] = env.eta_theta;
  out["eta_C"] = env.eta_C;
  out["sample_size"] = env.sample_size;
  out["seed"] = env.seed;
  out["window"] = Json::array({env.window.first, env.window.second});
  return out;
}

inline Json to_json(const ExperimentReport& report) {
  Json out;
  out["formula"] = to_json(report.formula);
  out["hypothesis_met"] = report.hypothesis_met;
  out["tail_threshold"] = report.tail_threshold;
  out["box_original"] = to_json(report.box_original);
  out["box_image"] = to_json(report.box_image);
  Json verdicts = Json::array();
  for (const MeasureVerdict& v : report.verdicts) {
    Json entry;
    entry["d"] = v.d;
    entry["bounded"] = v.bounded;
    entry["window_first_max"] = v.window_first_max;
    entry["window_last_max"] = v.window_last_max;
    Json scan = Json::array();
    for (const RatioScanRow& row : v.scan)
      scan.push_back(Json{{"level", row.m}, {"max_ratio", row.max_ratio}, {"argmax", row.argmax}});
    entry["scan"] = scan;
    entry["max_meet_count"] = v.balls.max_meet_count;
    entry["running_min"] = v.balls.running_min;
    verdicts.push_back(entry);
  }
  out["verdicts"] = verdicts;
  out["structure"] = to_json(report.structure);
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline void write_report(const std::filesystem::path& dir, const Json& config_echo,
                         Json body) {
  Json report;
  report["tool"] = kToolName;
  report["version"] = kVersion;
  report["config"] = config_echo;
  report["results"] = std::move(body);
  write_file(dir / "report.json", report.dump(2) + "\n");

  Json meta;
  meta["written_at"] = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
  meta["out_dir"] = dir.string();
  write_file(dir / "report_meta.json", meta.dump(2) + "\n");
}

inline void write_witness(const std::filesystem::path& dir, const Json& config_echo,
                          const std::string& stage, const Json& payload) {
  Json witness;
  witness["tool"] = kToolName;
  witness["version"] = kVersion;
  witness["stage"] = stage;
  witness["config"] = config_echo;
  witness["witness"] = payload;
  write_file(dir / ("witness_" + stage + ".json"), witness.dump(2) + "\n");
}

inline std::string csv_header(const Json& config_echo) {
  return std::string("# ") + kToolName + " " + kVersion + "\n# config " +
         config_echo.dump() + "\n";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Stable, sorted listing of generator kinds and map variants.
inline Json list_catalog() {
  Json catalog;
  Json generators;
  generators["middle_thirds"] =
      Json{{"params", Json::array()},
           {"doc", "two branches, ratio 1/3, single centered gap per level"}};
  generators["near_full"] =
      Json{{"params", Json::array()},
           {"doc", "two branches with c_k = (1-(k+1)^-2)/2; formula sequence climbs toward 1"}};
  generators["uniform_cantor"] =
      Json{{"params", Json::array({"n", "c"})},
           {"doc", "zero end gaps, equal interior gaps; n and c scalar or per-level arrays"}};
  Json maps;
  maps["affine"] = Json{{"params", Json::array({"scale", "offset"})},
                        {"doc", "x -> scale*x + offset, scale > 0"}};
  maps["composition"] = Json{{"params", Json::array({"components"})},
                             {"doc", "components applied left to right"}};
  maps["identity"] = Json{{"params", Json::array()}, {"doc", "x -> x"}};
  maps["power"] = Json{{"params", Json::array({"alpha"})},
                       {"doc", "x -> sign(x)|x|^alpha, alpha > 0"}};
  maps["shifted_power"] = Json{{"params", Json::array({"alpha", "shift"})},
                               {"doc", "odd power map about -shift, anchored at the origin"}};
  catalog["generators"] = generators;
  catalog["maps"] = maps;
  return catalog;
}

struct PipelineData {
  std::shared_ptr<const LevelSet> levels;
  std::shared_ptr<const StarSystem> star;
  std::shared_ptr<const Hierarchy> hierarchy;
};

inline PipelineData build_pipeline(const RunConfig& config) {
  PipelineData data;
  const HPSSpec spec = (config.pipeline_depth() == config.spec.depth())
                           ? config.spec
                           : truncate_spec(config.spec, config.pipeline_depth());
  data.levels = std::make_shared<const LevelSet>(build_levels(spec));
  if (spec.depth() >= 2) {
    data.star = std::make_shared<const StarSystem>(star_system(spec, data.levels));
    data.hierarchy = std::make_shared<const Hierarchy>(build_hierarchy(data.star));
  }
  return data;
}

/// Run one subcommand. Returns the process exit code: 0 success, 1 usage or
/// config error, 2 invariant violation (witness file written).
inline int run(const RunConfig& config, const std::string& subcommand) {
  namespace fs = std::filesystem;
  const fs::path dir(config.out);
  fs::create_directories(dir);

  try {
    if (subcommand == "validate") {
      const ValidationReport report = validate_spec(config.spec);
      detail::write_report(dir, config.resolved, Json{{"validation", to_json(report)}});
      if (!report.ok) {
        detail::write_witness(dir, config.resolved, "validate", to_json(report));
        return 2;
      }
      return 0;
    }

    if (subcommand == "construct") {
      const RunConfig& cfg = config;
      const HPSSpec spec = (cfg.pipeline_depth() == cfg.spec.depth())
                               ? cfg.spec
                               : truncate_spec(cfg.spec, cfg.pipeline_depth());
      PipelineData data;
      data.levels = std::make_shared<const LevelSet>(build_levels(spec));
      StarSystem star_value;
      const StarSystem* star = nullptr;
      if (spec.depth() >= 2) {
        star_value = star_system(spec, data.levels);
        star = &star_value;
      }
      std::ostringstream csv;
      csv << detail::csv_header(config.resolved);
      dump_intervals_csv(csv, spec, *data.levels, star);
      detail::write_file(dir / "intervals.csv", csv.str());

      CheckReport checks = verify_levels(spec, *data.levels);
      Json body;
      body["interval_count"] = data.levels->count(data.levels->depth());
      if (star) {
        const Rational chi = derive_chi(spec);
        const CheckReport star_checks = verify_star(spec, *star, chi);
        for (const auto& item : star_checks.items) checks.items.push_back(item);
        body["usable_star_depth"] = star->usable_depth();
        body["initial_star_length"] = format_rational(star->star_len[0]);
        body["chi"] = format_rational(chi);
      }
      body["checks"] = to_json(checks);
      detail::write_report(dir, config.resolved, std::move(body));
      if (!checks.all_ok()) {
        detail::write_witness(dir, config.resolved, "construct", to_json(checks));
        return 2;
      }
      return 0;
    }

    if (subcommand == "hierarchy") {
      const PipelineData data = build_pipeline(config);
      if (!data.hierarchy) throw ConfigError("hierarchy needs depth >= 2");
      std::ostringstream csv;
      csv << detail::csv_header(config.resolved);
      dump_hierarchy_csv(csv, *data.hierarchy);
      detail::write_file(dir / "hierarchy.csv", csv.str());

      CheckReport checks = verify_hierarchy(*data.hierarchy);
      const LevelLengthReport lengths = level_length_report(*data.hierarchy);
      checks.add("level_length_bounds", lengths.all_ok);
      const RatioSequences ratios = ratio_sequences(*data.hierarchy);
      for (const auto& item : ratios.checks.items) checks.items.push_back(item);
      const SubsequenceReport subseq =
          subsequence_report(*data.hierarchy, config.epsilon, config.p);

      Json body;
      body["branch_constant"] = data.hierarchy->branch_constant;
      body["chi"] = format_rational(data.hierarchy->chi);
      body["markers"] = data.hierarchy->markers;
      body["levels"] = data.hierarchy->top() + 1;
      Json lrows = Json::array();
      for (const LevelLengthRow& row : lengths.rows)
        lrows.push_back(Json{{"m", row.m},
                             {"is_marker", row.is_marker},
                             {"k", row.k},
                             {"total", format_rational(row.total)},
                             {"ok", row.ok}});
      body["level_lengths"] = lrows;
      Json srows = Json::array();
      for (const SubseqRow& row : subseq.rows)
        srows.push_back(Json{{"k", row.k},
                             {"a", row.a},
                             {"total_pow", row.total_pow},
                             {"small_gap_frac", row.small_gap_frac},
                             {"gap_product_pow", row.gap_product_pow}});
      body["pre_marker_trend"] = srows;
      body["best_pre_marker"] = subseq.best_index;
      body["checks"] = to_json(checks);
      detail::write_report(dir, config.resolved, std::move(body));
      if (!checks.all_ok()) {
        detail::write_witness(dir, config.resolved, "hierarchy", to_json(checks));
        return 2;
      }
      return 0;
    }

    if (subcommand == "dim") {
      const PipelineData data = build_pipeline(config);
      if (!data.star) throw ConfigError("dim needs depth >= 2");
      const FormulaReport formula = formula_dim(
          (config.pipeline_depth() == config.spec.depth())
              ? config.spec
              : truncate_spec(config.spec, config.pipeline_depth()),
          *data.star, config.window);
      const BoxReport box = box_dim(leaf_intervals(*data.levels), config.scales);

      std::ostringstream formula_csv;
      formula_csv << detail::csv_header(config.resolved) << "k,t_k\n";
      for (std::size_t i = 0; i < formula.values.size(); ++i)
        formula_csv << (i + 1) << ',' << detail::fmt(formula.values[i]) << '\n';
      detail::write_file(dir / "series_formula.csv", formula_csv.str());

      std::ostringstream box_csv;
      box_csv << detail::csv_header(config.resolved) << "log_inv_scale,log_count\n";
      for (const BoxRow& row : box.rows)
        box_csv << detail::fmt(std::log(1.0 / row.scale)) << ','
                << detail::fmt(std::log(static_cast<double>(row.count))) << '\n';
      detail::write_file(dir / "series_boxcount_E.csv", box_csv.str());

      detail::write_report(dir, config.resolved,
                           Json{{"formula", to_json(formula)}, {"box", to_json(box)}});
      return 0;
    }

    if (subcommand == "probe") {
      const DistortionEnvelope env = distortion_probe(
          config.map, config.probe.sample_size, config.probe.rho, config.seed,
          config.probe.window);
      detail::write_report(dir, config.resolved, Json{{"envelope", to_json(env)}});
      return 0;
    }

    if (subcommand == "measure") {
      const PipelineData data = build_pipeline(config);
      if (!data.hierarchy) throw ConfigError("measure needs depth >= 2");
      const ImageHierarchy image = push_hierarchy(config.map, data.hierarchy);

      std::ostringstream scan_csv, ball_csv;
      scan_csv << detail::csv_header(config.resolved) << "d,level,max_ratio,argmax\n";
      ball_csv << detail::csv_header(config.resolved) << "d,x,r,mass,ratio\n";
      Json body;
      Json per_d = Json::array();
      bool conservation_ok = true;
      double worst_drift = 0;
      for (double d : config.d_grid) {
        const BranchMeasure mu = build_mu(image, d);
        const double drift = max_level_mass_drift(mu);
        worst_drift = std::max(worst_drift, drift);
        if (drift > 1e-12) conservation_ok = false;
        const auto scan = ratio_scan(mu, image);
        for (const RatioScanRow& row : scan)
          scan_csv << detail::fmt(d) << ',' << row.m << ',' << detail::fmt(row.max_ratio) << ','
                   << row.argmax << '\n';
        const BallScanReport balls = ball_scan(
            mu, image, d, default_sample_points(image, config.ball.points),
            config.ball.radii_per_point);
        for (const BallScanRow& row : balls.rows)
          ball_csv << detail::fmt(d) << ',' << detail::fmt(row.x) << ',' << detail::fmt(row.r)
                   << ',' << detail::fmt(row.mass) << ',' << detail::fmt(row.ratio) << '\n';
        per_d.push_back(Json{{"d", d},
                             {"mass_drift", drift},
                             {"max_meet_count", balls.max_meet_count}});
      }
      detail::write_file(dir / "ratio_scan.csv", scan_csv.str());
      detail::write_file(dir / "ball_scan.csv", ball_csv.str());
      body["per_d"] = per_d;
      body["mass_conservation_ok"] = conservation_ok;
      body["worst_mass_drift"] = worst_drift;
      detail::write_report(dir, config.resolved, std::move(body));
      if (!conservation_ok) {
        detail::write_witness(dir, config.resolved, "measure",
                              Json{{"worst_mass_drift", worst_drift}, {"budget", 1e-12}});
        return 2;
      }
      return 0;
    }

    if (subcommand == "experiment") {
      ExperimentOptions options;
      options.tail_threshold = config.tail_threshold;
      options.ball_points = config.ball.points;
      options.radii_per_point = config.ball.radii_per_point;
      const ExperimentReport report =
          minimality_experiment(config.spec, config.map, config.d_grid,
                                config.pipeline_depth(), config.scales, options);

      std::ostringstream formula_csv;
      formula_csv << detail::csv_header(config.resolved) << "k,t_k\n";
      for (std::size_t i = 0; i < report.formula.values.size(); ++i)
        formula_csv << (i + 1) << ',' << detail::fmt(report.formula.values[i]) << '\n';
      detail::write_file(dir / "series_formula.csv", formula_csv.str());

      auto write_box = [&](const BoxReport& box, const std::string& name) {
        std::ostringstream csv;
        csv << detail::csv_header(config.resolved) << "log_inv_scale,log_count\n";
        for (const BoxRow& row : box.rows)
          csv << detail::fmt(std::log(1.0 / row.scale)) << ','
              << detail::fmt(std::log(static_cast<double>(row.count))) << '\n';
        detail::write_file(dir / name, csv.str());
      };
      write_box(report.box_original, "series_boxcount_E.csv");
      write_box(report.box_image, "series_boxcount_fE.csv");

      std::ostringstream trend_csv;
      trend_csv << detail::csv_header(config.resolved) << "d,level,max_ratio\n";
      for (const MeasureVerdict& verdict : report.verdicts)
        for (const RatioScanRow& row : verdict.scan)
          trend_csv << detail::fmt(verdict.d) << ',' << row.m << ','
                    << detail::fmt(row.max_ratio) << '\n';
      detail::write_file(dir / "series_ratio_trend.csv", trend_csv.str());

      detail::write_report(dir, config.resolved, to_json(report));
      if (!report.structure.all_ok()) {
        detail::write_witness(dir, config.resolved, "experiment", to_json(report.structure));
        return 2;
      }
      return 0;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const InvariantViolation& e) {
    Json payload;
    payload["error"] = e.what();
    try {
      payload["data"] = Json::parse(e.witness());
    } catch (...) {
      payload["data"] = e.witness();
    }
    detail::write_witness(dir, config.resolved, subcommand, payload);
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  }

  throw ConfigError("unknown subcommand '" + subcommand + "'");
}

}  // namespace cli
}  // namespace hps
