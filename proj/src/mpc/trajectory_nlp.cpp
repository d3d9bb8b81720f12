#include "umpc/mpc/trajectory_nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "umpc/errors.hpp"

namespace umpc::mpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Arc-length parameterized polyline.
class Polyline {
 public:
  explicit Polyline(std::span<const Vec2> points) : points_(points.begin(), points.end()) {
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      cumulative_.push_back(cumulative_.back() + (points_[i] - points_[i - 1]).norm());
    }
  }

  double length() const { return cumulative_.back(); }

  // Arc length of the closest point; ties resolve to the earliest segment.
  double project(const Vec2& q) const {
    if (points_.size() == 1) return 0.0;
    double best_dist = kInf;
    double best_arc = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const Vec2 seg = points_[i] - points_[i - 1];
      const double len_sq = seg.squaredNorm();
      const double t = len_sq > 0.0 ? std::clamp((q - points_[i - 1]).dot(seg) / len_sq, 0.0, 1.0)
                                    : 0.0;
      const double dist = (points_[i - 1] + t * seg - q).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best_arc = cumulative_[i - 1] + t * std::sqrt(len_sq);
      }
    }
    return best_arc;
  }

  Vec2 at(double arc) const {
    if (arc <= 0.0) return points_.front();
    if (arc >= length()) return points_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
    const auto i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    const double seg_len = cumulative_[i] - cumulative_[i - 1];
    const double t = seg_len > 0.0 ? (arc - cumulative_[i - 1]) / seg_len : 0.0;
    return points_[i - 1] + t * (points_[i] - points_[i - 1]);
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

}  // namespace

void MpcConfig::validate() const {
  const double fields[] = {dt,    w_p,   w_v,       w_a,   w_alpha, v_ref,   s_ref,
                           v_max, omega_max, a_max, alpha_max, r_robot, solve_time_cap};
  if (n_horizon < 1) throw std::invalid_argument("n_horizon must be >= 1");
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw std::invalid_argument("MPC configuration values must be positive and finite");
    }
  }
}

dynamics::StateVector ReferenceWindow::reference_state(std::size_t i) const {
  dynamics::StateVector x;
  x << points[i].x(), points[i].y(), 0.0, v_ref, 0.0;
  return x;
}

ReferenceWindow extract_reference_window(std::span<const Vec2> path, const RobotState& current,
                                         const MpcConfig& config) {
  if (path.empty()) throw std::invalid_argument("reference path is empty");
  const Polyline line(path);
  const double start = line.project(current.position());
  const double spacing = config.v_ref * config.dt;

  ReferenceWindow window;
  window.v_ref = config.v_ref;
  window.points.reserve(static_cast<std::size_t>(config.n_horizon));
  for (int i = 0; i < config.n_horizon; ++i) {
    window.points.push_back(line.at(start + i * spacing));
  }
  return window;
}

geometry::ForecastEllipse EllipseConstraint::ellipse(double s) const {
  geometry::ForecastEllipse e;
  e.center = center;
  e.rot = rot;
  e.enlargement = r_sum;
  e.raw.lambda1 = sqrt_lambda.x() * sqrt_lambda.x();
  e.raw.lambda2 = sqrt_lambda.y() * sqrt_lambda.y();
  e.raw.v1 = rot.col(0);
  e.raw.v2 = rot.col(1);
  e.inv_len_sq = geometry::enlarged_inv_len_sq(e.raw, s, r_sum);
  return e;
}

TrajectoryNlp::TrajectoryNlp(const MpcConfig& config, const RobotState& x0, ReferenceWindow refs,
                             std::span<const ObstacleForecast> obstacles,
                             const ChanceLevel& chance, const NlpOptions& options)
    : config_(config), x0_(x0), refs_(std::move(refs)), s_ref_(chance.s), n_(config.n_horizon) {
  config_.validate();
  if (static_cast<int>(refs_.size()) != n_) {
    throw DimensionMismatchError("reference window has " + std::to_string(refs_.size()) +
                                 " points, horizon is " + std::to_string(n_));
  }

  if (options.include_obstacle_constraints) {
    const double reach = n_ * config_.v_max * config_.dt;
    for (const ObstacleForecast& obs : obstacles) {
      if (static_cast<int>(obs.size()) != n_ || obs.sigma.size() != obs.mu.size()) {
        throw DimensionMismatchError("forecast for obstacle '" + obs.obstacle_id + "' has " +
                                     std::to_string(obs.size()) + " steps, horizon is " +
                                     std::to_string(n_));
      }
      std::vector<EllipseConstraint> rows;
      bool reachable = !options.prune_distant_obstacles;
      for (int i = 1; i <= n_; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const geometry::EigenDecomp2 eig = geometry::eig_sym_2x2(obs.sigma[idx]);
        EllipseConstraint row;
        row.step = i;
        row.obstacle_id = obs.obstacle_id;
        row.center = obs.mu[idx];
        row.rot = eig.rotation();
        row.sqrt_lambda = Vec2(std::sqrt(eig.lambda1), std::sqrt(eig.lambda2));
        row.r_sum = config_.r_robot + obs.radius;
        const double axis = s_ref_ * row.sqrt_lambda.x() + row.r_sum;
        if ((row.center - x0_.position()).norm() <= reach + axis) reachable = true;
        rows.push_back(std::move(row));
      }
      if (reachable) ellipses_.insert(ellipses_.end(), rows.begin(), rows.end());
    }
  }

  const int nv = num_variables();
  lower_ = Eigen::VectorXd::Constant(nv, -kInf);
  upper_ = Eigen::VectorXd::Constant(nv, kInf);
  q_diag_ = Eigen::VectorXd::Zero(nv);
  target_ = Eigen::VectorXd::Zero(nv);
  for (int i = 0; i < n_; ++i) {
    const int u = input_index(i);
    lower_(u) = -config_.a_max;
    upper_(u) = config_.a_max;
    lower_(u + 1) = -config_.alpha_max;
    upper_(u + 1) = config_.alpha_max;
    q_diag_(u) = config_.w_a;
    q_diag_(u + 1) = config_.w_alpha;
  }
  for (int i = 1; i <= n_; ++i) {
    const int x = state_index(i);
    lower_(x + 3) = -config_.v_max;
    upper_(x + 3) = config_.v_max;
    lower_(x + 4) = -config_.omega_max;
    upper_(x + 4) = config_.omega_max;
    q_diag_(x + 0) = config_.w_p;
    q_diag_(x + 1) = config_.w_p;
    q_diag_(x + 3) = config_.w_v;
    target_.segment<5>(x) = refs_.reference_state(static_cast<std::size_t>(i - 1));
  }
  lower_(s_index()) = 0.0;
  q_diag_(s_index()) = 1.0;
  target_(s_index()) = s_ref_;
  hessian_ = (2.0 * q_diag_).asDiagonal();
}

int TrajectoryNlp::num_state_bounds() const {
  int count = 0;
  for (int i = 1; i <= n_; ++i) {
    for (int k = 3; k < 5; ++k) {
      const int j = state_index(i) + k;
      count += std::isfinite(lower_(j)) + std::isfinite(upper_(j));
    }
  }
  return count;
}

int TrajectoryNlp::num_input_bounds() const {
  int count = 0;
  for (int j = 0; j < 2 * n_; ++j) count += std::isfinite(lower_(j)) + std::isfinite(upper_(j));
  return count;
}

RobotState TrajectoryNlp::state_at(const Eigen::VectorXd& z, int i) const {
  if (i == 0) return x0_;
  return RobotState::from_vector(z.segment<5>(state_index(i)));
}

ControlInput TrajectoryNlp::input_at(const Eigen::VectorXd& z, int i) const {
  return ControlInput::from_vector(z.segment<2>(input_index(i)));
}

double TrajectoryNlp::objective(const Eigen::VectorXd& z) const {
  return q_diag_.dot((z - target_).cwiseAbs2());
}

Eigen::VectorXd TrajectoryNlp::objective_gradient(const Eigen::VectorXd& z) const {
  return 2.0 * q_diag_.cwiseProduct(z - target_);
}

Eigen::VectorXd TrajectoryNlp::equality_residual(const Eigen::VectorXd& z) const {
  Eigen::VectorXd r(num_equalities());
  for (int i = 0; i < n_; ++i) {
    const RobotState next = dynamics::rk4_step(state_at(z, i), input_at(z, i), config_.dt);
    r.segment<5>(5 * i) = z.segment<5>(state_index(i + 1)) - next.vector();
  }
  return r;
}

Eigen::MatrixXd TrajectoryNlp::equality_jacobian(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_equalities(), num_variables());
  for (int i = 0; i < n_; ++i) {
    const auto lin = dynamics::rk4_step_linearized(state_at(z, i), input_at(z, i), config_.dt);
    jac.block<5, 5>(5 * i, state_index(i + 1)).setIdentity();
    if (i > 0) jac.block<5, 5>(5 * i, state_index(i)) = -lin.d_state;
    jac.block<5, 2>(5 * i, input_index(i)) = -lin.d_input;
  }
  return jac;
}

Eigen::VectorXd TrajectoryNlp::ellipse_values(const Eigen::VectorXd& z) const {
  const double s = z(s_index());
  Eigen::VectorXd g(num_ellipse_constraints());
  for (int k = 0; k < num_ellipse_constraints(); ++k) {
    const EllipseConstraint& row = ellipses_[static_cast<std::size_t>(k)];
    const Vec2 p = z.segment<2>(state_index(row.step));
    g(k) = geometry::constraint_value(row.ellipse(s), p) - 1.0;
  }
  return g;
}

Eigen::MatrixXd TrajectoryNlp::ellipse_jacobian(const Eigen::VectorXd& z) const {
  const double s = z(s_index());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(num_ellipse_constraints(), num_variables());
  for (int k = 0; k < num_ellipse_constraints(); ++k) {
    const EllipseConstraint& row = ellipses_[static_cast<std::size_t>(k)];
    const int xi = state_index(row.step);
    const Vec2 local = row.rot.transpose() * (z.segment<2>(xi) - row.center);
    const Vec2 len = s * row.sqrt_lambda + Vec2::Constant(row.r_sum);
    const Vec2 inv_sq = len.cwiseAbs2().cwiseInverse();
    jac.block<1, 2>(k, xi) = (2.0 * row.rot * inv_sq.cwiseProduct(local)).transpose();
    // d/ds of local_j^2 / (s sqrt(lambda_j) + r_sum)^2
    double d_s = 0.0;
    for (int j = 0; j < 2; ++j) {
      d_s -= 2.0 * local(j) * local(j) * row.sqrt_lambda(j) / (len(j) * len(j) * len(j));
    }
    jac(k, s_index()) = d_s;
  }
  return jac;
}

Eigen::VectorXd TrajectoryNlp::cold_start() const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(num_variables());
  RobotState x = x0_;
  for (int i = 1; i <= n_; ++i) {
    x = dynamics::rk4_step(x, {}, config_.dt);
    z.segment<5>(state_index(i)) = x.vector();
  }
  z(s_index()) = s_ref_;
  return z;
}

Eigen::VectorXd TrajectoryNlp::pack(std::span<const RobotState> states,
                                    std::span<const ControlInput> inputs, double s) const {
  if (static_cast<int>(states.size()) != n_ || static_cast<int>(inputs.size()) != n_) {
    throw DimensionMismatchError("trajectory length does not match the horizon");
  }
  Eigen::VectorXd z(num_variables());
  for (int i = 0; i < n_; ++i) {
    z.segment<2>(input_index(i)) = inputs[static_cast<std::size_t>(i)].vector();
    z.segment<5>(state_index(i + 1)) = states[static_cast<std::size_t>(i)].vector();
  }
  z(s_index()) = s;
  return z;
}

std::vector<RobotState> TrajectoryNlp::unpack_states(const Eigen::VectorXd& z) const {
  std::vector<RobotState> out;
  out.reserve(static_cast<std::size_t>(n_));
  for (int i = 1; i <= n_; ++i) out.push_back(state_at(z, i));
  return out;
}

std::vector<ControlInput> TrajectoryNlp::unpack_inputs(const Eigen::VectorXd& z) const {
  std::vector<ControlInput> out;
  out.reserve(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) out.push_back(input_at(z, i));
  return out;
}

TrajectoryNlp build_nlp(const MpcConfig& config, const RobotState& x0, ReferenceWindow refs,
                        std::span<const ObstacleForecast> obstacles, const ChanceLevel& chance,
                        const NlpOptions& options) {
  return TrajectoryNlp(config, x0, std::move(refs), obstacles, chance, options);
}

}  // namespace umpc::mpc
