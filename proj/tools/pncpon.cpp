// pncpon <experiment> --config <file> --out <dir> [--seed N] [--workers K]

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pncpon/experiments.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"PNC over TDM-PON experiment runner"};
  std::string experiment, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("experiment", experiment, "fig3 | fig4 | budget | capacity | calibrate")
      ->required()
      ->check(CLI::IsMember({"fig3", "fig4", "budget", "capacity", "calibrate"}));
  app.add_option("--config", config_path, "experiment configuration (INI)")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--workers", workers, "worker threads for sweeps")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pncpon::kExitConfigError;
  }

  pncpon::ExperimentConfig cfg;
  try {
    cfg = pncpon::load_config(config_path);
    if (!cfg.experiment.empty() && cfg.experiment != experiment)
      throw pncpon::ConfigError("run.experiment is '" + cfg.experiment + "' but '" + experiment +
                                "' was requested");
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
  } catch (const pncpon::ConfigError& e) {
    std::cerr << "pncpon: " << e.what() << "\n";
    return pncpon::kExitConfigError;
  }

  pncpon::ExperimentOutput result;
  try {
    result = pncpon::run_experiment(experiment, cfg, cfg.workers);
  } catch (const pncpon::ConfigError& e) {
    std::cerr << "pncpon: " << e.what() << "\n";
    return pncpon::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "pncpon: invalid parameter: " << e.what() << "\n";
    return pncpon::kExitConfigError;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "pncpon: cannot create " << out_dir << ": " << ec.message() << "\n";
    return 1;
  }
  for (const auto& [name, contents] : result.files) {
    const fs::path p = fs::path(out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    f << contents;
    if (!f) {
      std::cerr << "pncpon: cannot write " << p << "\n";
      return 1;
    }
    std::cout << p.string() << "\n";
  }
  if (!result.message.empty()) std::cerr << "pncpon: " << result.message << "\n";
  return result.exit_code;
}
