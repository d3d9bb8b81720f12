#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "svg.hpp"
#include "umpc/cli.hpp"

namespace umpc::cli {
namespace {

namespace fs = std::filesystem;

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  body(out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
  spdlog::debug("wrote {}", path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& out) { out << text; });
}

std::vector<Vec2> rectangle_outline(const geometry::ForecastRectangle& rect) {
  const auto c = rect.corners();
  return {c.begin(), c.end()};
}

}  // namespace

int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
  sim::ScenarioConfig config;
  try {
    config = load_scenario(manifest.config_path);
    if (manifest.seed) config.rng_seed = *manifest.seed;
    if (manifest.noise_std) config.noise_std = *manifest.noise_std;
    if (manifest.disable_obstacle_constraints) config.obstacle_constraints = false;
    if (manifest.parallel) config.parallel = true;
    config.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const IoError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << manifest.config_path.string() << ": " << e.what() << '\n';
    return kExitConfigError;
  }

  spdlog::info("running scenario '{}' with {} robot(s)", config.name, config.robots.size());
  const sim::SimLog log = sim::run_scenario(config);
  spdlog::info("simulated {:.1f} s in {} cycle records", log.end_time, log.cycles.size());

  try {
    const fs::path& dir = manifest.out_dir;
    ensure_directory(dir);
    write_file(dir / "log.csv", [&](std::ostream& os) { write_log_csv(log, os); });
    write_file(dir / "plans.csv", [&](std::ostream& os) { write_plans_csv(log, os); });
    write_file(dir / "forecasts.csv", [&](std::ostream& os) { write_forecasts_csv(log, os); });
    write_file(dir / "distances.csv", [&](std::ostream& os) { write_distances_csv(log, os); });
    write_file(dir / "timing.csv", [&](std::ostream& os) { write_timing_csv(log, os); });
    write_text(dir / "summary.json", summary_json(log));
    for (const sim::RobotSpec& r : config.robots) {
      write_text(dir / ("trajectory_" + r.id + ".svg"), trajectory_svg(log, r.id));
    }
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  }

  out << "scenario " << config.name << ": end " << format_double(log.end_time) << " s";
  if (log.final_state.size() >= 2) {
    const sim::SeparationReport rep = sim::separation_report(log);
    out << fmt::format(", min distance {:.4f} m at {:.1f} s ({}-{})", rep.min_distance,
                       rep.time_of_min, rep.closest_a, rep.closest_b);
  }
  out << '\n';
  for (const auto& [id, t] : log.arrival_time) {
    out << "  " << id << ": " << (t ? fmt::format("arrived at {:.1f} s", *t) : "not arrived")
        << '\n';
  }
  if (log.collision) {
    err << fmt::format("collision between {} and {} at {:.1f} s (distance {:.4f} m)\n",
                       log.collision->a, log.collision->b, log.collision->time,
                       log.collision->distance);
    return kExitCollision;
  }
  return kExitOk;
}

RegionAreas region_areas(const RegionsRequest& request) {
  const geometry::ChanceLevel chance = geometry::chi2_threshold(request.p);
  const geometry::EigenDecomp2 eig = geometry::eig_sym_2x2(request.sigma);
  RegionAreas areas;
  areas.ellipse = geometry::confidence_ellipse_area(request.sigma, chance);
  areas.enlarged = std::numbers::pi * (chance.s * std::sqrt(eig.lambda1) + request.r_sum) *
                   (chance.s * std::sqrt(eig.lambda2) + request.r_sum);
  areas.rectangle = geometry::rectangle_region(Vec2::Zero(), request.sigma, request.p).area();
  return areas;
}

std::string regions_svg(const RegionsRequest& request) {
  const geometry::ChanceLevel chance = geometry::chi2_threshold(request.p);
  const geometry::EigenDecomp2 eig = geometry::eig_sym_2x2(request.sigma);
  const Mat2 rot = eig.rotation();
  const Vec2 inner(chance.s * std::sqrt(eig.lambda1), chance.s * std::sqrt(eig.lambda2));
  const Vec2 outer = inner.array() + request.r_sum;
  const geometry::ForecastRectangle rect =
      geometry::rectangle_region(Vec2::Zero(), request.sigma, request.p);

  const std::vector<Vec2> inner_pts = geometry::ellipse_polyline(Vec2::Zero(), rot, inner);
  const std::vector<Vec2> outer_pts = geometry::ellipse_polyline(Vec2::Zero(), rot, outer);
  const std::vector<Vec2> rect_pts = rectangle_outline(rect);
  svg::Bounds bounds;
  for (const auto* pts : {&inner_pts, &outer_pts, &rect_pts}) {
    for (const Vec2& p : *pts) bounds.include(p, 0.0);
  }
  svg::Canvas canvas(bounds.padded(0.25 * (bounds.max_x - bounds.min_x) + 0.1), 600.0);
  canvas.polygon(outer_pts, "#e377c2", 0.15);
  canvas.polygon(rect_pts, "#ff7f0e", 0.15);
  canvas.polygon(inner_pts, "#1f77b4", 0.3);
  canvas.dot(Vec2::Zero(), 2.5, "#000000");
  canvas.text({8.0, 20.0}, fmt::format("p = {} (s = {:.4f}), r + r_d = {} m", request.p,
                                       chance.s, request.r_sum), 13.0);
  canvas.text({8.0, 38.0}, "blue: confidence ellipse, pink: enlarged ellipse, orange: rectangle",
              12.0);
  return canvas.str();
}

int cmd_regions(const RegionsRequest& request, std::ostream& out, std::ostream& err) {
  RegionAreas areas;
  std::string svg_text;
  try {
    if (!(request.r_sum >= 0.0)) throw std::invalid_argument("r_sum must be >= 0");
    areas = region_areas(request);
    svg_text = regions_svg(request);
  } catch (const std::exception& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    ensure_directory(request.out_dir);
    write_text(request.out_dir / "regions.svg", svg_text);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  }
  out << "ellipse_area_m2 " << format_double(areas.ellipse) << '\n'
      << "enlarged_ellipse_area_m2 " << format_double(areas.enlarged) << '\n'
      << "rectangle_area_m2 " << format_double(areas.rectangle) << '\n'
      << "rectangle_to_ellipse_ratio " << format_double(areas.rectangle / areas.ellipse) << '\n';
  return kExitOk;
}

std::vector<ErrorSample> error_map(const ErrorMapRequest& request) {
  if (request.resolution < kMinErrorMapResolution) {
    throw std::invalid_argument("resolution must be >= " +
                                std::to_string(kMinErrorMapResolution));
  }
  if (!(request.r_sum >= 0.0)) throw std::invalid_argument("r_sum must be >= 0");
  const geometry::ChanceLevel chance = geometry::chi2_threshold(request.p);
  std::vector<ErrorSample> map;
  map.reserve(static_cast<std::size_t>(request.resolution));
  for (int k = 0; k < request.resolution; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / request.resolution;
    map.push_back({theta, geometry::enlargement_error(request.sigma, chance, request.r_sum,
                                                      theta)});
  }
  return map;
}

std::string error_map_svg(const ErrorMapRequest& request, const std::vector<ErrorSample>& map) {
  // Polar plot around a reference circle: outward means the enlarged ellipse
  // over-covers the exact Minkowski sum, inward means it under-covers.
  double max_abs = 0.0;
  for (const ErrorSample& e : map) max_abs = std::max(max_abs, std::abs(e.error));
  const double base = 1.0;
  const double gain = max_abs > 0.0 ? 0.6 / max_abs : 0.0;
  std::vector<Vec2> curve;
  std::vector<Vec2> ring;
  for (const ErrorSample& e : map) {
    const Vec2 dir(std::cos(e.theta), std::sin(e.theta));
    curve.push_back((base + gain * e.error) * dir);
    ring.push_back(base * dir);
  }
  if (!curve.empty()) {
    curve.push_back(curve.front());
    ring.push_back(ring.front());
  }
  svg::Bounds bounds;
  bounds.include(Vec2::Zero(), base + 0.6);
  svg::Canvas canvas(bounds.padded(0.3), 600.0);
  canvas.line({-1.6, 0.0}, {1.6, 0.0}, "#cccccc", 0.5);
  canvas.line({0.0, -1.6}, {0.0, 1.6}, "#cccccc", 0.5);
  canvas.polyline(ring, "#999999", 1.0, "4 3");
  canvas.polyline(curve, "#d62728", 1.5);
  canvas.text({8.0, 20.0},
              fmt::format("enlargement error, p = {}, r + r_d = {} m, max |error| = {:.3e} m",
                          request.p, request.r_sum, max_abs),
              13.0);
  canvas.text({8.0, 38.0}, "angle in the eigenframe; dashed circle = zero error", 12.0);
  return canvas.str();
}

int cmd_error_map(const ErrorMapRequest& request, std::ostream& out, std::ostream& err) {
  std::vector<ErrorSample> map;
  try {
    map = error_map(request);
  } catch (const std::exception& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfigError;
  }
  double max_abs = 0.0;
  try {
    ensure_directory(request.out_dir);
    write_file(request.out_dir / "error_map.csv", [&](std::ostream& os) {
      os << "theta_rad,error_m\r\n";
      for (const ErrorSample& e : map) {
        os << format_double(e.theta) << ',' << format_double(e.error) << "\r\n";
        max_abs = std::max(max_abs, std::abs(e.error));
      }
    });
    write_text(request.out_dir / "error_map.svg", error_map_svg(request, map));
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIoError;
  }
  out << "samples " << map.size() << '\n' << "max_abs_error_m " << format_double(max_abs) << '\n';
  return kExitOk;
}

}  // namespace umpc::cli
