#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "umpc/cli.hpp"
#include "svg.hpp"

namespace umpc::cli {
namespace {

using sim::CycleRecord;
using sim::SimLog;

class CsvRow {
 public:
  explicit CsvRow(std::ostream& out) : out_(out) {}
  ~CsvRow() { out_ << "\r\n"; }
  CsvRow(const CsvRow&) = delete;
  CsvRow& operator=(const CsvRow&) = delete;

  CsvRow& operator<<(double v) { return field(format_double(v)); }
  CsvRow& operator<<(int v) { return field(std::to_string(v)); }
  CsvRow& operator<<(std::size_t v) { return field(std::to_string(v)); }
  CsvRow& operator<<(std::string_view s) { return field(csv_field(s)); }
  CsvRow& operator<<(const char* s) { return field(csv_field(s)); }

 private:
  CsvRow& field(const std::string& text) {
    if (!first_) out_ << ',';
    first_ = false;
    out_ << text;
    return *this;
  }

  std::ostream& out_;
  bool first_ = true;
};

void header(std::ostream& out, std::initializer_list<std::string_view> names) {
  CsvRow row(out);
  for (std::string_view n : names) row << n;
}

std::string status_name(const CycleRecord& c) {
  return c.status ? std::string(mpc::to_string(*c.status)) : std::string();
}

const CycleRecord* snapshot_cycle(const SimLog& log, const std::string& robot_id) {
  double target = 0.0;
  if (log.final_state.size() >= 2) target = sim::separation_report(log).time_of_min;
  const CycleRecord* best = nullptr;
  for (const CycleRecord* c : log.records_for(robot_id)) {
    if (!c->status || c->plan.empty()) continue;
    if (!best || std::abs(c->time - target) < std::abs(best->time - target)) best = c;
  }
  return best;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string quoted = "\"";
  for (char ch : text) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

void write_log_csv(const SimLog& log, std::ostream& out) {
  header(out, {"time_s", "robot_id", "x_m", "y_m", "phi_rad", "v_mps", "omega_radps",
               "cmd_v_mps", "cmd_omega_radps", "mode", "status", "iterations", "s_opt",
               "objective"});
  for (const CycleRecord& c : log.cycles) {
    CsvRow row(out);
    row << c.time << c.robot_id << c.state.x << c.state.y << c.state.phi << c.state.v
        << c.state.omega << c.command.v << c.command.omega << c.mode << status_name(c);
    if (c.status) {
      row << c.iterations << c.s_opt << c.objective;
    } else {
      row << "" << "" << "";
    }
  }
}

void write_plans_csv(const SimLog& log, std::ostream& out) {
  header(out, {"time_s", "robot_id", "step", "x_m", "y_m", "phi_rad", "v_mps", "omega_radps"});
  for (const CycleRecord& c : log.cycles) {
    for (std::size_t i = 0; i < c.plan.size(); ++i) {
      const dynamics::RobotState& s = c.plan[i];
      CsvRow row(out);
      row << c.time << c.robot_id << i + 1 << s.x << s.y << s.phi << s.v << s.omega;
    }
  }
}

void write_forecasts_csv(const SimLog& log, std::ostream& out) {
  header(out, {"time_s", "robot_id", "obstacle_id", "step", "mu_x_m", "mu_y_m", "sigma_xx_m2",
               "sigma_xy_m2", "sigma_yy_m2"});
  for (const CycleRecord& c : log.cycles) {
    for (const forecast::ObstacleForecast& f : c.forecasts) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        CsvRow row(out);
        row << c.time << c.robot_id << f.obstacle_id << i + 1 << f.mu[i].x() << f.mu[i].y()
            << f.sigma[i].xx() << f.sigma[i].xy() << f.sigma[i].yy();
      }
    }
  }
}

void write_distances_csv(const SimLog& log, std::ostream& out) {
  header(out, {"time_s", "robot_a", "robot_b", "distance_m"});
  for (const sim::DistanceSample& d : log.distances) {
    CsvRow row(out);
    row << d.time << d.a << d.b << d.distance;
  }
}

void write_timing_csv(const SimLog& log, std::ostream& out) {
  header(out, {"time_s", "robot_id", "status", "iterations", "wall_time_s"});
  for (const CycleRecord& c : log.cycles) {
    if (!c.status) continue;
    CsvRow row(out);
    row << c.time << c.robot_id << status_name(c) << c.iterations << c.wall_time;
  }
}

std::string summary_json(const SimLog& log) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = log.config.name;
  j["seed"] = log.config.rng_seed;
  j["robots"] = static_cast<int>(log.final_state.size());
  j["end_time_s"] = log.end_time;
  j["obstacle_constraints"] = log.config.obstacle_constraints;
  j["collision"] = log.collision.has_value();
  if (log.collision) {
    j["collision_event"] = {{"time_s", log.collision->time},
                            {"robot_a", log.collision->a},
                            {"robot_b", log.collision->b},
                            {"distance_m", log.collision->distance}};
  }
  ordered_json arrivals = ordered_json::object();
  for (const auto& [id, t] : log.arrival_time) arrivals[id] = t ? ordered_json(*t) : nullptr;
  j["arrival_time_s"] = arrivals;

  if (log.final_state.size() >= 2) {
    const sim::SeparationReport rep = sim::separation_report(log);
    j["min_distance_m"] = rep.min_distance;
    j["time_of_min_s"] = rep.time_of_min;
    j["closest_pair"] = {rep.closest_a, rep.closest_b};
    j["softened_cycles"] = rep.softened_cycles;
    j["degraded_cycles"] = rep.degraded_cycles;
    j["solved_cycles"] = rep.solved_cycles;
    j["wall_time_p50_s"] = rep.wall_p50;
    j["wall_time_p95_s"] = rep.wall_p95;
    j["wall_time_max_s"] = rep.wall_max;
  } else {
    j["min_distance_m"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string trajectory_svg(const SimLog& log, const std::string& robot_id) {
  const auto spec_it =
      std::find_if(log.config.robots.begin(), log.config.robots.end(),
                   [&](const sim::RobotSpec& r) { return r.id == robot_id; });
  if (spec_it == log.config.robots.end()) {
    throw std::invalid_argument("unknown robot '" + robot_id + "'");
  }
  const CycleRecord* snap = snapshot_cycle(log, robot_id);

  svg::Bounds bounds;
  for (const sim::RobotSpec& r : log.config.robots) {
    for (const Vec2& w : r.waypoints) bounds.include(w, r.radius);
    bounds.include(r.initial.position(), r.radius);
  }
  for (const CycleRecord& c : log.cycles) bounds.include(c.state.position(), 0.0);
  if (snap) {
    for (const dynamics::RobotState& s : snap->plan) bounds.include(s.position(), 0.0);
  }
  svg::Canvas canvas(bounds.padded(0.5), 720.0);

  std::string title = log.config.name + " - robot " + robot_id;
  if (snap) title += fmt::format(" - t = {:.1f} s", snap->time);
  canvas.text({8.0, 20.0}, title, 14.0);

  for (const sim::RobotSpec& r : log.config.robots) {
    std::vector<Vec2> driven;
    for (const CycleRecord* c : log.records_for(r.id)) driven.push_back(c->state.position());
    if (log.final_state.count(r.id)) driven.push_back(log.final_state.at(r.id).position());
    const bool self = r.id == robot_id;
    canvas.polyline(driven, self ? "#333333" : "#999999", self ? 1.5 : 1.0);
  }

  canvas.polyline(spec_it->waypoints, "#2ca02c", 1.0, "4 3");
  for (const Vec2& w : spec_it->waypoints) canvas.dot(w, 3.0, "#2ca02c");

  if (snap) {
    const double s = geometry::chi2_threshold(log.config.chance_p).s;
    for (const forecast::ObstacleForecast& f : snap->forecasts) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        const geometry::EigenDecomp2 eig = geometry::eig_sym_2x2(f.sigma[i]);
        const Vec2 axes(s * std::sqrt(eig.lambda1), s * std::sqrt(eig.lambda2));
        canvas.polygon(geometry::ellipse_polyline(f.mu[i], eig.rotation(), axes, 48),
                       "#e377c2", 0.35);
        canvas.dot(f.mu[i], 1.5, "#e377c2");
      }
    }
    for (const Vec2& ref : snap->references) canvas.dot(ref, 2.5, "#2ca02c");
    for (const dynamics::RobotState& st : snap->plan) canvas.dot(st.position(), 2.5, "#1f77b4");
    for (const CycleRecord* c : log.records_for(robot_id)) {
      if (c == snap) canvas.circle(c->state.position(), spec_it->radius, "#1f77b4");
    }
    for (const sim::RobotSpec& r : log.config.robots) {
      if (r.id == robot_id) continue;
      for (const CycleRecord* c : log.records_for(r.id)) {
        if (std::abs(c->time - snap->time) < 1e-9) {
          canvas.circle(c->state.position(), r.radius, "#d62728");
        }
      }
    }
  }
  return canvas.str();
}

}  // namespace umpc::cli
