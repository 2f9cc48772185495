#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "hps/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"homogeneous perfect set toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  long depth = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool have_seed = false;

  auto add_run_subcommand = [&](const std::string& name, const std::string& doc) {
    CLI::App* sub = app.add_subcommand(name, doc);
    sub->add_option("config", config_path, "JSON config file")->required();
    sub->add_option("--depth", depth, "override pipeline depth");
    sub->add_option("--seed", seed, "override RNG seed")->each([&](const std::string&) {
      have_seed = true;
    });
    sub->add_option("--out", out, "override output directory");
    return sub;
  };

  add_run_subcommand("validate", "check a spec against the construction rules");
  add_run_subcommand("construct", "build the exact interval tree and its trimmed system");
  add_run_subcommand("hierarchy", "build the branch hierarchy and verify its properties");
  add_run_subcommand("dim", "formula and box-count dimension estimates");
  add_run_subcommand("probe", "empirical distortion envelope of the configured map");
  add_run_subcommand("measure", "branch measures and ratio/ball scans");
  add_run_subcommand("experiment", "full pipeline report");
  app.add_subcommand("catalog", "list generator kinds and map variants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "catalog") {
    std::cout << hps::cli::list_catalog().dump(2) << "\n";
    return 0;
  }

  try {
    hps::RunConfig config = hps::load_config(config_path);
    if (depth > 0) config.depth = depth;
    if (have_seed) config.seed = seed;
    if (!out.empty()) config.out = out;
    if (depth > 0) config.resolved["depth"] = config.pipeline_depth();
    if (have_seed) config.resolved["seed"] = config.seed;
    return hps::cli::run(config, name);
  } catch (const hps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
