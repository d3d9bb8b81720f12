#include "umpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace umpc::sim {
namespace {

constexpr double kTimeEpsilon = 1e-9;
constexpr double kSoftenedTolerance = 1e-6;

struct Robot {
  const RobotSpec* spec = nullptr;
  RobotState state;
  VelocityCommand prev_cmd;
  std::unique_ptr<mpc::RecedingHorizonPlanner> planner;
  std::map<std::string, std::vector<Vec2>> peer_positions;
  std::optional<double> arrival;
};

// Interpolated quantile of sorted data (linear between closest ranks).
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

forecast::ObstacleForecast forecast_peer(const std::vector<Vec2>& positions,
                                         const RobotSpec& peer, const ScenarioConfig& config) {
  const double dt = config.mpc.dt;
  const std::vector<Vec2> vels = forecast::velocities_from_positions(positions, dt);
  const forecast::Var2Model model = vels.empty() ? forecast::constant_velocity_model(vels)
                                                 : forecast::fit_var2_or_fallback(vels, dt);
  const Vec2 latest = vels.empty() ? Vec2::Zero() : vels.back();
  const Vec2 previous = vels.size() >= 2 ? vels[vels.size() - 2] : latest;
  const forecast::VelocityForecast vf =
      forecast::forecast_velocity(model, latest, previous, config.mpc.n_horizon);
  const geometry::Covariance2 sigma0 =
      geometry::Covariance2::isotropic(config.noise_std * config.noise_std);
  return forecast::propagate_position(positions.back(), sigma0, vf, dt, peer.id, peer.radius);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (robots.empty()) throw std::invalid_argument("scenario needs at least one robot");
  std::set<std::string> ids;
  for (const RobotSpec& r : robots) {
    if (r.id.empty()) throw std::invalid_argument("robot id must not be empty");
    if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate robot id '" + r.id + "'");
    if (!(r.radius > 0.0)) throw std::invalid_argument("robot '" + r.id + "': radius must be > 0");
    if (r.waypoints.empty()) {
      throw std::invalid_argument("robot '" + r.id + "': waypoint path is empty");
    }
  }
  mpc.validate();
  if (!(chance_p > 0.0 && chance_p < 1.0)) throw std::invalid_argument("chance_p must be in (0, 1)");
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (history_window < 2) throw std::invalid_argument("history_window must be >= 2");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (!(goal_tolerance > 0.0)) throw std::invalid_argument("goal_tolerance must be > 0");
  if (!(clearance_margin >= 0.0)) throw std::invalid_argument("clearance_margin must be >= 0");
  if (!(dt_ctrl > 0.0) || dt_ctrl > mpc.dt ||
      std::abs(mpc.dt / dt_ctrl - std::round(mpc.dt / dt_ctrl)) > 1e-9) {
    throw std::invalid_argument("dt_ctrl must divide the MPC sample time");
  }
}

std::vector<const CycleRecord*> SimLog::records_for(const std::string& robot_id) const {
  std::vector<const CycleRecord*> out;
  for (const CycleRecord& c : cycles) {
    if (c.robot_id == robot_id) out.push_back(&c);
  }
  return out;
}

RobotState advance_plant(const RobotState& state, const VelocityCommand& prev_cmd,
                         const VelocityCommand& cmd, double dt, double dt_ctrl,
                         std::vector<RobotState>* trace) {
  RobotState s = state;
  for (const VelocityCommand& c : dynamics::smooth_velocity(prev_cmd, cmd, dt, dt_ctrl)) {
    s = dynamics::rk4_step(s, dynamics::acceleration_towards(s, c, dt_ctrl), dt_ctrl);
    if (trace) trace->push_back(s);
  }
  return s;
}

SimLog run_scenario(const ScenarioConfig& config) {
  config.validate();
  SimLog log;
  log.config = config;

  std::vector<RobotSpec> specs = config.robots;
  std::sort(specs.begin(), specs.end(),
            [](const RobotSpec& a, const RobotSpec& b) { return a.id < b.id; });
  const std::size_t n_robots = specs.size();

  mpc::NlpOptions nlp_options;
  nlp_options.include_obstacle_constraints = config.obstacle_constraints;
  std::vector<Robot> robots(n_robots);
  for (std::size_t i = 0; i < n_robots; ++i) {
    Robot& r = robots[i];
    r.spec = &specs[i];
    r.state = specs[i].initial;
    r.prev_cmd = {r.state.v, r.state.omega};
    mpc::MpcConfig cfg = config.mpc;
    cfg.r_robot = specs[i].radius + config.clearance_margin;
    r.planner = std::make_unique<mpc::RecedingHorizonPlanner>(cfg, nlp_options);
  }

  const geometry::ChanceLevel chance{config.chance_p, config.mpc.s_ref};
  const double dt = config.mpc.dt;
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto record_distances = [&](double t, const std::vector<RobotState>& states) {
    for (std::size_t i = 0; i < n_robots; ++i) {
      for (std::size_t j = i + 1; j < n_robots; ++j) {
        const double d = (states[i].position() - states[j].position()).norm();
        log.distances.push_back({t, specs[i].id, specs[j].id, d});
        if (!log.collision && d < specs[i].radius + specs[j].radius) {
          log.collision = CollisionEvent{t, specs[i].id, specs[j].id, d};
        }
      }
    }
  };
  {
    std::vector<RobotState> states;
    for (const Robot& r : robots) states.push_back(r.state);
    record_distances(0.0, states);
  }

  for (long cycle = 0;; ++cycle) {
    const double t = static_cast<double>(cycle) * dt;
    log.end_time = t;
    for (Robot& r : robots) {
      const Vec2 goal = r.spec->waypoints.back();
      if (!r.arrival && (r.state.position() - goal).norm() <= config.goal_tolerance) {
        r.arrival = t;
      }
    }
    const bool all_arrived =
        std::all_of(robots.begin(), robots.end(), [](const Robot& r) { return r.arrival; });
    if (log.collision || all_arrived || t >= config.duration - kTimeEpsilon) break;

    // Peer observations from the cycle-start snapshot.
    for (std::size_t i = 0; i < n_robots; ++i) {
      for (std::size_t j = 0; j < n_robots; ++j) {
        if (i == j) continue;
        Vec2 p = robots[j].state.position();
        if (config.noise_std > 0.0) {
          p.x() += config.noise_std * noise(rng);
          p.y() += config.noise_std * noise(rng);
        }
        std::vector<Vec2>& hist = robots[i].peer_positions[specs[j].id];
        hist.push_back(p);
        const auto keep = static_cast<std::size_t>(config.history_window) + 1;
        if (hist.size() > keep) hist.erase(hist.begin(), hist.end() - static_cast<long>(keep));
      }
    }

    auto plan = [&](std::size_t i) {
      Robot& r = robots[i];
      CycleRecord rec;
      rec.time = t;
      rec.robot_id = r.spec->id;
      rec.state = r.state;
      for (std::size_t j = 0; j < n_robots; ++j) {
        if (j == i) continue;
        rec.forecasts.push_back(forecast_peer(r.peer_positions.at(specs[j].id), specs[j], config));
      }
      if (r.arrival) {
        rec.mode = "arrived";
        rec.command = {0.0, 0.0};
        r.planner->reset();
        return rec;
      }
      const mpc::ReferenceWindow refs =
          mpc::extract_reference_window(r.spec->waypoints, r.state, r.planner->config());
      rec.references = refs.points;
      const mpc::PlannerOutput out = r.planner->step(r.state, refs, rec.forecasts, chance);
      rec.command = out.command;
      rec.mode = std::string(mpc::to_string(out.mode));
      rec.status = out.solution.status;
      rec.iterations = out.solution.iterations;
      rec.wall_time = out.solution.wall_time;
      rec.s_opt = out.solution.s_opt;
      rec.objective = out.solution.objective;
      rec.dynamics_residual = out.solution.dynamics_residual;
      rec.constraint_violation = out.solution.constraint_violation;
      if (r.planner->current_plan()) rec.plan = r.planner->current_plan()->states;
      return rec;
    };

    std::vector<CycleRecord> records(n_robots);
    if (config.parallel && n_robots > 1) {
      std::vector<std::future<CycleRecord>> futures;
      for (std::size_t i = 0; i < n_robots; ++i) {
        futures.push_back(std::async(std::launch::async, plan, i));
      }
      for (std::size_t i = 0; i < n_robots; ++i) records[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < n_robots; ++i) records[i] = plan(i);
    }

    std::vector<std::vector<RobotState>> traces(n_robots);
    for (std::size_t i = 0; i < n_robots; ++i) {
      Robot& r = robots[i];
      r.state = advance_plant(r.state, r.prev_cmd, records[i].command, dt, config.dt_ctrl,
                              &traces[i]);
      r.prev_cmd = records[i].command;
      log.cycles.push_back(std::move(records[i]));
    }
    for (std::size_t k = 0; k < traces.front().size(); ++k) {
      std::vector<RobotState> states;
      for (const auto& trace : traces) states.push_back(trace[k]);
      record_distances(t + static_cast<double>(k + 1) * config.dt_ctrl, states);
    }
  }

  for (const Robot& r : robots) {
    log.arrival_time[r.spec->id] = r.arrival;
    log.final_state[r.spec->id] = r.state;
  }
  return log;
}

SeparationReport separation_report(const SimLog& log) {
  if (log.final_state.size() < 2) {
    throw std::invalid_argument("separation report needs at least two robots");
  }
  SeparationReport rep;
  rep.min_distance = std::numeric_limits<double>::infinity();
  for (const DistanceSample& d : log.distances) {
    if (d.distance < rep.min_distance) {
      rep.min_distance = d.distance;
      rep.time_of_min = d.time;
      rep.closest_a = d.a;
      rep.closest_b = d.b;
    }
  }
  rep.arrival_time = log.arrival_time;
  rep.collision = log.collision.has_value();

  std::vector<double> walls;
  for (const CycleRecord& c : log.cycles) {
    if (!c.status) continue;
    ++rep.solved_cycles;
    walls.push_back(c.wall_time);
    if (c.s_opt < log.config.mpc.s_ref - kSoftenedTolerance) ++rep.softened_cycles;
    if (c.mode != "planned") ++rep.degraded_cycles;
  }
  std::sort(walls.begin(), walls.end());
  rep.wall_p50 = quantile(walls, 0.50);
  rep.wall_p95 = quantile(walls, 0.95);
  rep.wall_max = walls.empty() ? 0.0 : walls.back();
  return rep;
}

}  // namespace umpc::sim
