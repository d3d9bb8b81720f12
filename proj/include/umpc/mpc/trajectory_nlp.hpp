#pragma once

/**
 * @file trajectory_nlp.hpp
 * @brief Multiple-shooting transcription of the trajectory-planning problem.
 *
 * Decision vector z = (u_0 .. u_{N-1}, x_1 .. x_N, s), size 2N + 5N + 1.
 *
 *   minimize  sum_i (x_i - x_ref,i)^T Q (x_i - x_ref,i) + u_{i-1}^T P u_{i-1}
 *             + (s - s_ref)^2
 *   s.t.      x_{i+1} = rk4(x_i, u_i),  x_0 fixed
 *             dp^T R Lambda(s)^{-1} R^T dp >= 1   per obstacle and step
 *             |v_i| <= v_max, |omega_i| <= omega_max
 *             |a_i| <= a_max, |alpha_i| <= alpha_max, s >= 0
 *
 * with Q = diag(w_p, w_p, 0, w_v, 0), P = diag(w_a, w_alpha) and
 * Lambda(s)^{-1} = diag(1 / (s sqrt(lambda_j) + r + r_d)^2).
 */

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "umpc/dynamics.hpp"
#include "umpc/forecast.hpp"
#include "umpc/geometry.hpp"

namespace umpc::mpc {

using dynamics::ControlInput;
using dynamics::RobotState;
using forecast::ObstacleForecast;
using geometry::ChanceLevel;

struct MpcConfig {
  int n_horizon = 15;
  double dt = 0.5;             // s
  double w_p = 100.0;          // 1/m^2
  double w_v = 10.0;           // s^2/m^2
  double w_a = 1e4;            // s^4/m^2
  double w_alpha = 500.0;      // s^4
  double v_ref = 0.5;          // m/s
  double s_ref = 2.4476519360399265;  // sqrt(5.991)
  double v_max = 0.7;          // m/s
  double omega_max = 0.3;      // rad/s
  double a_max = 0.7;          // m/s^2
  double alpha_max = 0.1;      // rad/s^2
  double r_robot = 0.75;       // m
  double solve_time_cap = 0.45;  // s

  /// Throws std::invalid_argument unless every field is positive and N >= 1.
  void validate() const;
};

/// Reference positions for steps i = 1..N; x_ref,i = (x_r, y_r, 0, v_ref, 0).
struct ReferenceWindow {
  std::vector<Vec2> points;
  double v_ref = 0.5;

  std::size_t size() const { return points.size(); }
  dynamics::StateVector reference_state(std::size_t i) const;
};

/// Projects the robot onto the polyline and samples N points v_ref * dt apart
/// along arc length, starting at the projection and clamped at the last
/// waypoint.
ReferenceWindow extract_reference_window(std::span<const Vec2> path, const RobotState& current,
                                         const MpcConfig& config);

struct NlpOptions {
  bool include_obstacle_constraints = true;
  /// Drop obstacles whose every forecast ellipse is out of reach within the
  /// horizon.
  bool prune_distant_obstacles = true;
};

/// Data of one ellipse inequality; the shape depends on the decision s.
struct EllipseConstraint {
  int step = 1;  // 1..N
  std::string obstacle_id;
  Vec2 center = Vec2::Zero();
  Mat2 rot = Mat2::Identity();
  Vec2 sqrt_lambda = Vec2::Zero();
  double r_sum = 0.0;

  geometry::ForecastEllipse ellipse(double s) const;
};

class TrajectoryNlp {
 public:
  /// Throws DimensionMismatchError if a forecast or the reference window
  /// does not have exactly N entries.
  TrajectoryNlp(const MpcConfig& config, const RobotState& x0, ReferenceWindow refs,
                std::span<const ObstacleForecast> obstacles, const ChanceLevel& chance,
                const NlpOptions& options = {});

  int horizon() const { return n_; }
  int num_variables() const { return 7 * n_ + 1; }
  int num_equalities() const { return 5 * n_; }
  int num_ellipse_constraints() const { return static_cast<int>(ellipses_.size()); }
  /// Finite scalar bounds on v and omega, counting each side.
  int num_state_bounds() const;
  /// Finite scalar bounds on a and alpha, counting each side.
  int num_input_bounds() const;

  /// Offset of u_{k+i}, i = 0..N-1.
  int input_index(int i) const { return 2 * i; }
  /// Offset of x_{k+i}, i = 1..N.
  int state_index(int i) const { return 2 * n_ + 5 * (i - 1); }
  int s_index() const { return 7 * n_; }

  const Eigen::VectorXd& lower_bounds() const { return lower_; }
  const Eigen::VectorXd& upper_bounds() const { return upper_; }

  double objective(const Eigen::VectorXd& z) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& z) const;
  /// The objective is quadratic, so its Hessian is constant and diagonal.
  const Eigen::MatrixXd& objective_hessian() const { return hessian_; }

  /// x_{i+1} - rk4(x_i, u_i) for i = 0..N-1, stacked.
  Eigen::VectorXd equality_residual(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& z) const;

  /// g - 1 per ellipse constraint; feasible when >= 0.
  Eigen::VectorXd ellipse_values(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd ellipse_jacobian(const Eigen::VectorXd& z) const;

  /// Zero inputs, states forward-simulated from x0, s = s_ref.
  Eigen::VectorXd cold_start() const;
  Eigen::VectorXd pack(std::span<const RobotState> states, std::span<const ControlInput> inputs,
                       double s) const;
  std::vector<RobotState> unpack_states(const Eigen::VectorXd& z) const;
  std::vector<ControlInput> unpack_inputs(const Eigen::VectorXd& z) const;

  const std::vector<EllipseConstraint>& ellipse_constraints() const { return ellipses_; }
  const MpcConfig& config() const { return config_; }
  const RobotState& initial_state() const { return x0_; }
  const ReferenceWindow& references() const { return refs_; }

 private:
  RobotState state_at(const Eigen::VectorXd& z, int i) const;
  ControlInput input_at(const Eigen::VectorXd& z, int i) const;

  MpcConfig config_;
  RobotState x0_;
  ReferenceWindow refs_;
  double s_ref_;
  int n_;
  std::vector<EllipseConstraint> ellipses_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::VectorXd q_diag_;  // per-variable weights of the quadratic objective
  Eigen::VectorXd target_;  // per-variable targets of the quadratic objective
  Eigen::MatrixXd hessian_;
};

/// Convenience wrapper around the TrajectoryNlp constructor.
TrajectoryNlp build_nlp(const MpcConfig& config, const RobotState& x0, ReferenceWindow refs,
                        std::span<const ObstacleForecast> obstacles, const ChanceLevel& chance,
                        const NlpOptions& options = {});

}  // namespace umpc::mpc
