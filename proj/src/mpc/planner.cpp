#include "umpc/mpc/planner.hpp"

#include <algorithm>
#include <cmath>

namespace umpc::mpc {
namespace {

double approach_zero(double value, double max_change) {
  if (std::abs(value) <= max_change) return 0.0;
  return value - std::copysign(max_change, value);
}

bool usable(const MpcSolution& sol) {
  if (sol.status == SolveStatus::optimal) return true;
  return sol.status != SolveStatus::infeasible && sol.feasible();
}

}  // namespace

std::string_view to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::planned: return "planned";
    case PlanMode::degraded: return "degraded";
    case PlanMode::shifted: return "shifted";
    case PlanMode::braking: return "braking";
  }
  return "unknown";
}

MpcSolution shift_solution(const MpcSolution& solution, double dt) {
  MpcSolution shifted = solution;
  if (solution.states.empty() || solution.inputs.empty()) return shifted;
  shifted.states.erase(shifted.states.begin());
  shifted.inputs.erase(shifted.inputs.begin());
  shifted.inputs.push_back(solution.inputs.back());
  shifted.states.push_back(dynamics::rk4_step(solution.states.back(), solution.inputs.back(), dt));
  return shifted;
}

RecedingHorizonPlanner::RecedingHorizonPlanner(MpcConfig config, NlpOptions nlp_options)
    : config_(config), nlp_options_(nlp_options) {
  config_.validate();
  sqp_options_.time_cap = config_.solve_time_cap;
}

void RecedingHorizonPlanner::reset() {
  plan_.reset();
  failures_ = 0;
}

VelocityCommand RecedingHorizonPlanner::braking_command(const RobotState& x) const {
  return {approach_zero(x.v, config_.a_max * config_.dt),
          approach_zero(x.omega, config_.alpha_max * config_.dt)};
}

PlannerOutput RecedingHorizonPlanner::step(const RobotState& x_measured,
                                           const ReferenceWindow& refs,
                                           std::span<const ObstacleForecast> obstacles,
                                           const ChanceLevel& chance) {
  const TrajectoryNlp nlp(config_, x_measured, refs, obstacles, chance, nlp_options_);
  std::optional<MpcSolution> warm;
  if (plan_) warm = shift_solution(*plan_, config_.dt);

  PlannerOutput out;
  out.solution = solve(nlp, warm, sqp_options_);
  if (usable(out.solution)) {
    failures_ = 0;
    plan_ = out.solution;
    out.mode = out.solution.status == SolveStatus::optimal ? PlanMode::planned
                                                           : PlanMode::degraded;
    const RobotState& first = plan_->states.front();
    out.command = {first.v, first.omega};
    return out;
  }

  ++failures_;
  if (failures_ >= 2 || !warm) {
    out.mode = PlanMode::braking;
    out.command = braking_command(x_measured);
    plan_.reset();
    return out;
  }
  plan_ = *warm;
  out.mode = PlanMode::shifted;
  const RobotState& first = plan_->states.front();
  out.command = {first.v, first.omega};
  return out;
}

}  // namespace umpc::mpc
