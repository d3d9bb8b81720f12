#include "umpc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace umpc::dynamics {
namespace {

StateVector derivative(const StateVector& x, const InputVector& u) {
  StateVector dx;
  dx << std::cos(x(2)) * x(3), std::sin(x(2)) * x(3), x(4), u(0), u(1);
  return dx;
}

// d f / d x at x; f does not depend on position.
StateJacobian derivative_jacobian(const StateVector& x) {
  StateJacobian a = StateJacobian::Zero();
  const double c = std::cos(x(2));
  const double s = std::sin(x(2));
  a(0, 2) = -s * x(3);
  a(0, 3) = c;
  a(1, 2) = c * x(3);
  a(1, 3) = s;
  a(2, 4) = 1.0;
  return a;
}

InputJacobian input_jacobian() {
  InputJacobian b = InputJacobian::Zero();
  b(3, 0) = 1.0;
  b(4, 1) = 1.0;
  return b;
}

}  // namespace

StateVector RobotState::vector() const {
  StateVector s;
  s << x, y, phi, v, omega;
  return s;
}

RobotState RobotState::from_vector(const StateVector& s) {
  return {s(0), s(1), s(2), s(3), s(4)};
}

StateVector unicycle_derivative(const RobotState& state, const ControlInput& input) {
  return derivative(state.vector(), input.vector());
}

RobotState rk4_step(const RobotState& state, const ControlInput& input, double dt) {
  const StateVector x = state.vector();
  const InputVector u = input.vector();
  const StateVector k1 = derivative(x, u);
  const StateVector k2 = derivative(x + 0.5 * dt * k1, u);
  const StateVector k3 = derivative(x + 0.5 * dt * k2, u);
  const StateVector k4 = derivative(x + dt * k3, u);
  return RobotState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Rk4Linearization rk4_step_linearized(const RobotState& state, const ControlInput& input,
                                     double dt) {
  const StateVector x = state.vector();
  const InputVector u = input.vector();
  const StateJacobian eye = StateJacobian::Identity();
  const InputJacobian b = input_jacobian();

  const StateVector x1 = x;
  const StateVector k1 = derivative(x1, u);
  const StateJacobian a1 = derivative_jacobian(x1);
  const StateJacobian dk1_dx = a1;
  const InputJacobian dk1_du = b;

  const StateVector x2 = x + 0.5 * dt * k1;
  const StateVector k2 = derivative(x2, u);
  const StateJacobian a2 = derivative_jacobian(x2);
  const StateJacobian dk2_dx = a2 * (eye + 0.5 * dt * dk1_dx);
  const InputJacobian dk2_du = a2 * (0.5 * dt * dk1_du) + b;

  const StateVector x3 = x + 0.5 * dt * k2;
  const StateVector k3 = derivative(x3, u);
  const StateJacobian a3 = derivative_jacobian(x3);
  const StateJacobian dk3_dx = a3 * (eye + 0.5 * dt * dk2_dx);
  const InputJacobian dk3_du = a3 * (0.5 * dt * dk2_du) + b;

  const StateVector x4 = x + dt * k3;
  const StateVector k4 = derivative(x4, u);
  const StateJacobian a4 = derivative_jacobian(x4);
  const StateJacobian dk4_dx = a4 * (eye + dt * dk3_dx);
  const InputJacobian dk4_du = a4 * (dt * dk3_du) + b;

  Rk4Linearization out;
  out.next = RobotState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  out.d_state = eye + dt / 6.0 * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx);
  out.d_input = dt / 6.0 * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du);
  return out;
}

std::vector<VelocityCommand> smooth_velocity(const VelocityCommand& prev_cmd,
                                             const VelocityCommand& new_cmd, double dt_mpc,
                                             double dt_ctrl) {
  if (!(dt_ctrl > 0.0) || dt_ctrl > dt_mpc) {
    throw std::invalid_argument("need 0 < dt_ctrl <= dt_mpc");
  }
  const double ratio = dt_mpc / dt_ctrl;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9) {
    throw std::invalid_argument("dt_mpc must be an integer multiple of dt_ctrl");
  }
  const int n = static_cast<int>(steps);
  const double accel_v = (new_cmd.v - prev_cmd.v) / dt_mpc;
  const double accel_w = (new_cmd.omega - prev_cmd.omega) / dt_mpc;

  std::vector<VelocityCommand> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k < n; ++k) {
    const double t = k * dt_ctrl;
    out.push_back({prev_cmd.v + accel_v * t, prev_cmd.omega + accel_w * t});
  }
  out.push_back(new_cmd);
  return out;
}

ControlInput acceleration_towards(const RobotState& state, const VelocityCommand& cmd,
                                  double dt) {
  return {(cmd.v - state.v) / dt, (cmd.omega - state.omega) / dt};
}

}  // namespace umpc::dynamics
