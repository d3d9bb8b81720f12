#pragma once

/**
 * @file cli.hpp
 * @brief Scenario files, output emitters and the `umpc` subcommands.
 *
 * Scenario files are TOML with the unit in every dimensional key name
 * (`radius_m`, `v_max_mps`, ...). Parse and schema errors carry the
 * `file:line:column:` of the offending node.
 */

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "umpc/geometry.hpp"
#include "umpc/sim.hpp"

namespace umpc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitCollision = 2,
  kExitIoError = 3,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a scenario. `source_name` prefixes error locations.
/// Throws ConfigError.
sim::ScenarioConfig parse_scenario(std::string_view text, const std::string& source_name);

/// Throws IoError if the file cannot be read, ConfigError if it is invalid.
sim::ScenarioConfig load_scenario(const std::filesystem::path& path);

struct RunManifest {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  bool disable_obstacle_constraints = false;
  std::optional<double> noise_std;  // m
  bool parallel = false;
};

// CSV emitters: header row, fixed column order, RFC 4180 quoting, SI units.

/// One row per cycle and robot. Contains no wall-clock data, so identical
/// inputs give byte-identical files.
void write_log_csv(const sim::SimLog& log, std::ostream& out);
void write_plans_csv(const sim::SimLog& log, std::ostream& out);
void write_forecasts_csv(const sim::SimLog& log, std::ostream& out);
void write_distances_csv(const sim::SimLog& log, std::ostream& out);
/// Solver status, iterations and wall time per solved cycle.
void write_timing_csv(const sim::SimLog& log, std::ostream& out);

/// separation_report fields plus collision and run metadata, pretty-printed.
std::string summary_json(const sim::SimLog& log);

/// Waypoints (green), driven paths, the planned trajectory points (blue) and
/// the un-enlarged forecast ellipses (pink) of one robot at the cycle closest
/// to the time of minimum separation.
std::string trajectory_svg(const sim::SimLog& log, const std::string& robot_id);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);
/// RFC 4180 field quoting.
std::string csv_field(std::string_view text);

/// Runs the scenario and writes log.csv, plans.csv, forecasts.csv,
/// distances.csv, timing.csv, summary.json and trajectory_<id>.svg.
/// Returns an ExitCode.
int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err);

struct RegionsRequest {
  double p = 0.9;
  geometry::Covariance2 sigma;
  double r_sum = 1.5;  // m
  std::filesystem::path out_dir;
};

struct RegionAreas {
  double ellipse = 0.0;    // un-enlarged confidence ellipse, m^2
  double enlarged = 0.0;   // ellipse grown by r_sum, m^2
  double rectangle = 0.0;  // Bonferroni rectangle, m^2
};

RegionAreas region_areas(const RegionsRequest& request);
std::string regions_svg(const RegionsRequest& request);

/// Writes regions.svg and prints the areas and the rectangle/ellipse ratio.
int cmd_regions(const RegionsRequest& request, std::ostream& out, std::ostream& err);

inline constexpr int kMinErrorMapResolution = 16;

struct ErrorMapRequest {
  geometry::Covariance2 sigma;
  double p = 0.9;
  double r_sum = 1.5;  // m
  int resolution = 360;
  std::filesystem::path out_dir;
};

struct ErrorSample {
  double theta = 0.0;  // rad, eigenframe
  double error = 0.0;  // m
};

/// enlargement_error at theta = 2 pi k / resolution. Throws
/// std::invalid_argument if resolution < kMinErrorMapResolution.
std::vector<ErrorSample> error_map(const ErrorMapRequest& request);
std::string error_map_svg(const ErrorMapRequest& request, const std::vector<ErrorSample>& map);

/// Writes error_map.csv and error_map.svg.
int cmd_error_map(const ErrorMapRequest& request, std::ostream& out, std::ostream& err);

}  // namespace umpc::cli
