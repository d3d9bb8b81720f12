#include "umpc/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "umpc/errors.hpp"

namespace umpc::forecast {
namespace {

using Mat4 = Eigen::Matrix4d;

Mat4 companion(const Var2Model& m) {
  Mat4 f = Mat4::Zero();
  f.block<2, 2>(0, 0) = m.a1;
  f.block<2, 2>(0, 2) = m.a2;
  f.block<2, 2>(2, 0) = Mat2::Identity();
  return f;
}

}  // namespace

double Var2Model::spectral_radius() const {
  const Eigen::EigenSolver<Mat4> solver(companion(*this), false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Var2Model fit_var2(std::span<const Vec2> velocity_history, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const auto t_total = static_cast<int>(velocity_history.size());
  if (t_total < kMinVar2Samples) {
    throw InsufficientDataError("VAR(2) fit needs at least " + std::to_string(kMinVar2Samples) +
                                " samples, got " + std::to_string(t_total));
  }
  const int rows = t_total - 2;
  Eigen::MatrixXd regressors(rows, 5);
  Eigen::MatrixXd targets(rows, 2);
  for (int t = 2; t < t_total; ++t) {
    const Vec2& lag1 = velocity_history[static_cast<std::size_t>(t - 1)];
    const Vec2& lag2 = velocity_history[static_cast<std::size_t>(t - 2)];
    regressors.row(t - 2) << 1.0, lag1.x(), lag1.y(), lag2.x(), lag2.y();
    targets.row(t - 2) = velocity_history[static_cast<std::size_t>(t)].transpose();
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(regressors,
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 0.0) || sv(0) / smallest > kMaxConditionNumber) {
    throw RankDeficiencyError("VAR(2) regressor matrix is numerically singular");
  }
  const Eigen::MatrixXd coef = svd.solve(targets);  // 5 x 2
  const Eigen::MatrixXd residuals = targets - regressors * coef;

  Var2Model model;
  model.c = coef.row(0).transpose();
  model.a1 = coef.block(1, 0, 2, 2).transpose();
  model.a2 = coef.block(3, 0, 2, 2).transpose();
  model.sigma_u = Covariance2::from_matrix(residuals.transpose() * residuals / (rows - 5));
  model.n_obs = t_total;
  return model;
}

Var2Model constant_velocity_model(std::span<const Vec2> velocity_history) {
  Var2Model model;
  model.a1 = Mat2::Identity();
  model.fallback = true;
  model.n_obs = static_cast<int>(velocity_history.size());

  Vec2 variance = Vec2::Zero();
  if (velocity_history.size() >= 3) {
    const auto n = velocity_history.size() - 1;
    Vec2 mean = Vec2::Zero();
    for (std::size_t t = 1; t <= n; ++t) mean += velocity_history[t] - velocity_history[t - 1];
    mean /= static_cast<double>(n);
    for (std::size_t t = 1; t <= n; ++t) {
      variance += (velocity_history[t] - velocity_history[t - 1] - mean).cwiseAbs2();
    }
    variance /= static_cast<double>(n - 1);
  }
  model.sigma_u = Covariance2(std::max(variance.x(), kFallbackVarianceFloor), 0.0,
                              std::max(variance.y(), kFallbackVarianceFloor));
  return model;
}

Var2Model fit_var2_or_fallback(std::span<const Vec2> velocity_history, double dt) {
  try {
    Var2Model model = fit_var2(velocity_history, dt);
    if (model.spectral_radius() < 1.0) return model;
  } catch (const InsufficientDataError&) {
  } catch (const RankDeficiencyError&) {
  }
  return constant_velocity_model(velocity_history);
}

VelocityForecast forecast_velocity(const Var2Model& model, const Vec2& latest,
                                   const Vec2& previous, int horizon) {
  if (horizon < 1) throw std::invalid_argument("forecast horizon must be >= 1");
  VelocityForecast out;
  out.seed = latest;
  out.steps.reserve(static_cast<std::size_t>(horizon));

  const Mat2 sigma_u = model.sigma_u.matrix();
  Vec2 lag1 = latest;
  Vec2 lag2 = previous;
  Mat2 phi_prev = Mat2::Zero();  // Phi_{j-1}
  Mat2 phi = Mat2::Identity();   // Phi_j
  Mat2 mse = Mat2::Zero();
  for (int h = 1; h <= horizon; ++h) {
    const Vec2 mean = model.c + model.a1 * lag1 + model.a2 * lag2;
    lag2 = lag1;
    lag1 = mean;

    mse += phi * sigma_u * phi.transpose();
    const Mat2 phi_next = model.a1 * phi + model.a2 * phi_prev;
    phi_prev = phi;
    phi = phi_next;

    out.steps.push_back({mean, Covariance2::from_matrix(mse)});
  }
  return out;
}

ObstacleForecast propagate_position(const Vec2& mu0, const Covariance2& sigma0,
                                    const VelocityForecast& vf, double dt,
                                    std::string obstacle_id, double radius) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  ObstacleForecast out;
  out.obstacle_id = std::move(obstacle_id);
  out.radius = radius;
  out.mu.reserve(vf.steps.size());
  out.sigma.reserve(vf.steps.size());

  Vec2 mu = mu0;
  Covariance2 sigma = sigma0;
  Vec2 mu_v_prev = vf.seed;
  Covariance2 sigma_v_prev;  // current velocity is observed, zero covariance
  const double half_dt = 0.5 * dt;
  for (const VelocityStep& step : vf.steps) {
    mu = mu + half_dt * (step.mu_v + mu_v_prev);
    sigma = sigma + (half_dt * half_dt) * (step.sigma_v + sigma_v_prev);
    out.mu.push_back(mu);
    out.sigma.push_back(sigma);
    mu_v_prev = step.mu_v;
    sigma_v_prev = step.sigma_v;
  }
  return out;
}

std::vector<Vec2> velocities_from_positions(std::span<const Vec2> positions, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  std::vector<Vec2> out;
  if (positions.size() < 2) return out;
  out.reserve(positions.size() - 1);
  for (std::size_t i = 1; i < positions.size(); ++i) {
    out.push_back((positions[i] - positions[i - 1]) / dt);
  }
  return out;
}

}  // namespace umpc::forecast
