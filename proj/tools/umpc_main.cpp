#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "umpc/cli.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("umpc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("UMPC_LOG")) spdlog::cfg::helpers::load_levels(level);
}

umpc::geometry::Covariance2 covariance(const std::vector<double>& entries) {
  return {entries.at(0), entries.at(1), entries.at(2)};
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Uncertainty-aware MPC planner: scenario simulator and forecast-region tools"};
  app.require_subcommand(1);

  umpc::cli::RunManifest manifest;
  std::uint64_t seed = 0;
  double noise_std = 0.0;
  CLI::App* run = app.add_subcommand("run", "simulate a scenario and write logs and plots");
  run->add_option("--config", manifest.config_path, "scenario TOML file")->required();
  run->add_option("--out", manifest.out_dir, "output directory")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  CLI::Option* noise_opt =
      run->add_option("--noise-std", noise_std, "std of exchanged position noise (m)")
          ->check(CLI::NonNegativeNumber);
  run->add_flag("--disable-obstacle-constraints", manifest.disable_obstacle_constraints,
                "plan without ellipse constraints (negative control)");
  run->add_flag("--parallel", manifest.parallel, "solve the robots of a cycle concurrently");

  std::vector<double> sigma{1.0, 0.0, 1.0};
  umpc::cli::RegionsRequest regions;
  CLI::App* reg = app.add_subcommand("regions", "compare ellipse and rectangle forecast regions");
  reg->add_option("--p", regions.p, "probability")->default_val(0.9);
  reg->add_option("--sigma", sigma, "covariance entries xx xy yy (m^2)")
      ->expected(3)
      ->default_str("1 0 1");
  reg->add_option("--r-sum", regions.r_sum, "combined radius r + r_d (m)")->default_val(1.5);
  reg->add_option("--out", regions.out_dir, "output directory")->required();

  umpc::cli::ErrorMapRequest emap;
  CLI::App* err_map = app.add_subcommand("error-map", "enlargement error over the angle");
  err_map->add_option("--p", emap.p, "probability")->default_val(0.9);
  err_map->add_option("--sigma", sigma, "covariance entries xx xy yy (m^2)")
      ->expected(3)
      ->default_str("1 0 1");
  err_map->add_option("--r-sum", emap.r_sum, "combined radius r + r_d (m)")->default_val(1.5);
  err_map->add_option("--resolution", emap.resolution, "number of angles")->default_val(360);
  err_map->add_option("--out", emap.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : umpc::cli::kExitConfigError;
  }

  if (run->parsed()) {
    if (*seed_opt) manifest.seed = seed;
    if (*noise_opt) manifest.noise_std = noise_std;
    return umpc::cli::cmd_run(manifest, std::cout, std::cerr);
  }
  try {
    if (reg->parsed()) {
      regions.sigma = covariance(sigma);
      return umpc::cli::cmd_regions(regions, std::cout, std::cerr);
    }
    emap.sigma = covariance(sigma);
    return umpc::cli::cmd_error_map(emap, std::cout, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return umpc::cli::kExitConfigError;
  }
}
