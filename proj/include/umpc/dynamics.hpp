#pragma once

/**
 * @file dynamics.hpp
 * @brief Unicycle kinematics with acceleration inputs.
 *
 * State x = (x, y, phi, v, omega), input u = (a, alpha):
 *     dx/dt = v cos(phi), dy/dt = v sin(phi), dphi/dt = omega,
 *     dv/dt = a,          domega/dt = alpha.
 */

#include <vector>

#include <Eigen/Core>

#include "umpc/geometry.hpp"

namespace umpc::dynamics {

inline constexpr int kStateDim = 5;
inline constexpr int kInputDim = 2;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using InputVector = Eigen::Matrix<double, kInputDim, 1>;
using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

struct RobotState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double phi = 0.0;    // rad, not normalized
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  Vec2 position() const { return {x, y}; }
  StateVector vector() const;
  static RobotState from_vector(const StateVector& s);

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct ControlInput {
  double a = 0.0;      // m/s^2
  double alpha = 0.0;  // rad/s^2

  InputVector vector() const { return {a, alpha}; }
  static ControlInput from_vector(const InputVector& u) { return {u(0), u(1)}; }

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

/// Velocity-level command (v, omega) sent to the low-level controller.
struct VelocityCommand {
  double v = 0.0;
  double omega = 0.0;

  friend bool operator==(const VelocityCommand&, const VelocityCommand&) = default;
};

StateVector unicycle_derivative(const RobotState& state, const ControlInput& input);

/// Classical RK4 with the input held constant over the step.
RobotState rk4_step(const RobotState& state, const ControlInput& input, double dt);

struct Rk4Linearization {
  RobotState next;
  StateJacobian d_state;  // d next / d state
  InputJacobian d_input;  // d next / d input
};

/// rk4_step plus its exact Jacobians, propagated through the four stages.
Rk4Linearization rk4_step_linearized(const RobotState& state, const ControlInput& input,
                                     double dt);

/// Ramps linearly from `prev_cmd` to `new_cmd` over one planner period.
///
/// The implied acceleration is (new_cmd - prev_cmd) / dt_mpc. Returns
/// dt_mpc / dt_ctrl commands; the k-th is prev + k/n (new - prev), so the
/// last one equals `new_cmd` exactly. Throws std::invalid_argument if dt_mpc
/// is not an integer multiple of dt_ctrl (tolerance 1e-9).
std::vector<VelocityCommand> smooth_velocity(const VelocityCommand& prev_cmd,
                                             const VelocityCommand& new_cmd, double dt_mpc,
                                             double dt_ctrl);

/// Constant acceleration that takes (v, omega) of `state` to `cmd` in `dt`.
ControlInput acceleration_towards(const RobotState& state, const VelocityCommand& cmd,
                                  double dt);

}  // namespace umpc::dynamics
