#pragma once

/**
 * @file sqp_solver.hpp
 * @brief Line-search SQP for TrajectoryNlp.
 *
 * Each iteration linearizes the dynamics and condenses the state increments
 * onto the input increments, leaving a small dense QP in (du, ds) plus elastic
 * slacks on the linearized ellipse rows. The Hessian is a damped BFGS
 * approximation of the Lagrangian Hessian seeded with the exact objective
 * Hessian, reset to that seed after a heavily damped line search. Steps are
 * accepted on an l1 penalty merit function with a second-order correction.
 */

#include <optional>
#include <string_view>
#include <vector>

#include "umpc/mpc/trajectory_nlp.hpp"

namespace umpc::mpc {

enum class SolveStatus { optimal, max_iter, time_cap, infeasible };

std::string_view to_string(SolveStatus status);

struct MpcSolution {
  std::vector<RobotState> states;    // x_{k+1} .. x_{k+N}
  std::vector<ControlInput> inputs;  // u_k .. u_{k+N-1}
  double s_opt = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
  int iterations = 0;
  double wall_time = 0.0;  // s

  double dynamics_residual = 0.0;     // inf-norm of the equality residual
  double constraint_violation = 0.0;  // worst ellipse or bound violation
  double dual_residual = 0.0;  // inf-norm of the Lagrangian gradient over 1 + inf-norm of the cost gradient

  /// Primal residuals within kFeasibilityTolerance.
  bool feasible() const;
};

inline constexpr double kFeasibilityTolerance = 1e-6;

struct SqpOptions {
  int max_iterations = 60;
  double primal_tolerance = 1e-8;
  double dual_tolerance = 1e-4;
  double time_cap = 0.45;  // s; non-positive disables the cap
  double initial_penalty = 10.0;
  double max_penalty = 1e8;
  /// Replaces non-positive diagonal entries of the initial Hessian.
  double hessian_floor = 1.0;
};

/// Solves from the warm start if given, otherwise from TrajectoryNlp::cold_start.
/// The warm start is clipped to the variable bounds. Deterministic unless
/// the time cap triggers.
MpcSolution solve(const TrajectoryNlp& nlp, const std::optional<MpcSolution>& warm_start = {},
                  const SqpOptions& options = {});

/// Maximum primal violation of `z` (dynamics, ellipses, bounds).
double primal_violation(const TrajectoryNlp& nlp, const Eigen::VectorXd& z);

}  // namespace umpc::mpc
