#pragma once

/**
 * @file sim.hpp
 * @brief Lockstep closed-loop simulation of robots that plan around each other.
 *
 * Every cycle each robot receives the true positions of its peers (optionally
 * with Gaussian noise), forecasts them with a VAR(2) model, plans with its own
 * RecedingHorizonPlanner and drives an RK4 unicycle plant with the smoothed
 * velocity command. Robots plan in id order from the cycle-start snapshot.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umpc/dynamics.hpp"
#include "umpc/forecast.hpp"
#include "umpc/mpc/planner.hpp"

namespace umpc::sim {

using dynamics::RobotState;
using dynamics::VelocityCommand;

struct RobotSpec {
  std::string id;
  RobotState initial;
  std::vector<Vec2> waypoints;
  double radius = 0.75;  // m
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::vector<RobotSpec> robots;
  mpc::MpcConfig mpc;
  double chance_p = 0.95;
  double duration = 60.0;      // s
  std::uint64_t rng_seed = 0;
  int history_window = 40;     // velocity samples kept per peer
  double noise_std = 0.0;      // m, position noise on exchanged peer positions
  double dt_ctrl = 0.1;        // s, velocity-smoother and plant step
  double goal_tolerance = 0.1; // m
  double clearance_margin = 0.0;  // m, added to each robot's planning radius
  bool obstacle_constraints = true;
  bool parallel = false;

  /// Throws std::invalid_argument on the first violated invariant.
  void validate() const;
};

struct CycleRecord {
  double time = 0.0;
  std::string robot_id;
  RobotState state;  // measured at cycle start
  VelocityCommand command;
  std::string mode;  // a PlanMode name, or "arrived"
  std::optional<mpc::SolveStatus> status;
  int iterations = 0;
  double wall_time = 0.0;
  double s_opt = 0.0;
  double objective = 0.0;
  double dynamics_residual = 0.0;
  double constraint_violation = 0.0;
  std::vector<RobotState> plan;
  std::vector<Vec2> references;
  std::vector<forecast::ObstacleForecast> forecasts;
};

struct DistanceSample {
  double time = 0.0;
  std::string a;
  std::string b;
  double distance = 0.0;
};

struct CollisionEvent {
  double time = 0.0;
  std::string a;
  std::string b;
  double distance = 0.0;
};

struct SimLog {
  ScenarioConfig config;
  std::vector<CycleRecord> cycles;  // cycle-major, robots in id order
  std::vector<DistanceSample> distances;
  std::map<std::string, std::optional<double>> arrival_time;
  std::map<std::string, RobotState> final_state;
  std::optional<CollisionEvent> collision;
  double end_time = 0.0;

  std::vector<const CycleRecord*> records_for(const std::string& robot_id) const;
};

/// One planner period of the plant: the command ramps from `prev_cmd` to `cmd`
/// in dt_ctrl steps, each realized by the constant acceleration reaching the
/// ramp value. Appends the intermediate states to `trace` if given.
RobotState advance_plant(const RobotState& state, const VelocityCommand& prev_cmd,
                         const VelocityCommand& cmd, double dt, double dt_ctrl,
                         std::vector<RobotState>* trace = nullptr);

/// Runs until every robot reached its goal, the duration elapsed, or two
/// robots collided. Throws std::invalid_argument for an invalid config.
SimLog run_scenario(const ScenarioConfig& config);

struct SeparationReport {
  double min_distance = 0.0;
  double time_of_min = 0.0;
  std::string closest_a;
  std::string closest_b;
  std::map<std::string, std::optional<double>> arrival_time;
  int softened_cycles = 0;  // solved cycles with s_opt < s_ref
  int degraded_cycles = 0;  // cycles not in mode "planned" or "arrived"
  int solved_cycles = 0;
  double wall_p50 = 0.0;
  double wall_p95 = 0.0;
  double wall_max = 0.0;
  bool collision = false;
};

/// Throws std::invalid_argument for logs with fewer than two robots.
SeparationReport separation_report(const SimLog& log);

}  // namespace umpc::sim
