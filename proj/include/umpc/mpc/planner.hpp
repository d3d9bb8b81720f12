#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "umpc/mpc/sqp_solver.hpp"
#include "umpc/mpc/trajectory_nlp.hpp"

namespace umpc::mpc {

using dynamics::VelocityCommand;

enum class PlanMode {
  planned,   // fresh solve, status optimal
  degraded,  // time_cap / max_iter with a feasible iterate
  shifted,   // solver failed, previous plan shifted by one step
  braking,   // repeated failure, decelerating at a_max / alpha_max
};

std::string_view to_string(PlanMode mode);

struct PlannerOutput {
  VelocityCommand command;
  MpcSolution solution;  // the raw solver result of this cycle
  PlanMode mode = PlanMode::planned;
};

/// Drops the first step of a plan; the last input is repeated and the last
/// state integrated forward with it.
MpcSolution shift_solution(const MpcSolution& solution, double dt);

/// Stateful per-robot planner. Not thread-safe; use one instance per robot.
class RecedingHorizonPlanner {
 public:
  explicit RecedingHorizonPlanner(MpcConfig config, NlpOptions nlp_options = {});

  /// Solves at `x_measured` and returns (v, omega) of the first predicted
  /// state. On failure falls back to the shifted previous plan, and brakes
  /// after two consecutive failures.
  PlannerOutput step(const RobotState& x_measured, const ReferenceWindow& refs,
                     std::span<const ObstacleForecast> obstacles, const ChanceLevel& chance);

  void reset();

  const std::optional<MpcSolution>& current_plan() const { return plan_; }
  int consecutive_failures() const { return failures_; }
  const MpcConfig& config() const { return config_; }
  SqpOptions& solver_options() { return sqp_options_; }

 private:
  VelocityCommand braking_command(const RobotState& x) const;

  MpcConfig config_;
  NlpOptions nlp_options_;
  SqpOptions sqp_options_;
  std::optional<MpcSolution> plan_;
  int failures_ = 0;
};

}  // namespace umpc::mpc
