#pragma once

/**
 * @file forecast.hpp
 * @brief VAR(2) velocity prediction and propagation to position moments.
 *
 * Obstacle velocities follow v_t = c + A1 v_{t-1} + A2 v_{t-2} + u_t with
 * u_t ~ N(0, Sigma_u). Velocity forecasts are integrated to positions with the
 * trapezoid rule, adding the velocity covariances and ignoring cross terms:
 *
 *     mu_i    = mu_{i-1}    + dt (mu_v,i + mu_v,i-1) / 2
 *     Sigma_i = Sigma_{i-1} + dt^2/4 (Sigma_v,i + Sigma_v,i-1)
 */

#include <span>
#include <string>
#include <vector>

#include "umpc/geometry.hpp"

namespace umpc::forecast {

using geometry::Covariance2;

/// Minimum number of velocity samples accepted by fit_var2.
inline constexpr int kMinVar2Samples = 8;
/// Regressor condition number above which a fit is rejected.
inline constexpr double kMaxConditionNumber = 1e12;
/// Per-axis innovation variance floor of the constant-velocity fallback, (m/s)^2.
inline constexpr double kFallbackVarianceFloor = 1e-6;

struct Var2Model {
  Mat2 a1 = Mat2::Zero();
  Mat2 a2 = Mat2::Zero();
  Vec2 c = Vec2::Zero();  // m/s
  Covariance2 sigma_u;    // (m/s)^2
  int n_obs = 0;
  bool fallback = false;

  /// Largest modulus among the eigenvalues of the 4x4 companion matrix.
  double spectral_radius() const;
};

/// OLS fit of (c, A1, A2) on one-step residuals; Sigma_u uses the
/// denominator T - 2 - 5.
///
/// Throws InsufficientDataError for fewer than kMinVar2Samples samples and
/// RankDeficiencyError when the regressor condition number exceeds
/// kMaxConditionNumber.
Var2Model fit_var2(std::span<const Vec2> velocity_history, double dt);

/// Random-walk velocity model (A1 = I): the mean forecast holds the last
/// velocity. Sigma_u is the per-axis variance of first differences, floored
/// at kFallbackVarianceFloor.
Var2Model constant_velocity_model(std::span<const Vec2> velocity_history);

/// fit_var2, falling back to constant_velocity_model when the data are too
/// short, rank deficient, or the fitted model is explosive.
Var2Model fit_var2_or_fallback(std::span<const Vec2> velocity_history, double dt);

struct VelocityStep {
  Vec2 mu_v = Vec2::Zero();
  Covariance2 sigma_v;
};

struct VelocityForecast {
  /// Last observed velocity, the deterministic step-0 seed.
  Vec2 seed = Vec2::Zero();
  std::vector<VelocityStep> steps;  // i = 1..N
};

/// h-step forecasts; Sigma_v,h = sum_{j<h} Phi_j Sigma_u Phi_j^T with Phi_j
/// the top-left block of the j-th companion-matrix power.
VelocityForecast forecast_velocity(const Var2Model& model, const Vec2& latest,
                                   const Vec2& previous, int horizon);

struct ObstacleForecast {
  std::string obstacle_id;
  double radius = 0.0;      // r_d, m
  std::vector<Vec2> mu;     // i = 1..N
  std::vector<Covariance2> sigma;

  std::size_t size() const { return mu.size(); }
};

ObstacleForecast propagate_position(const Vec2& mu0, const Covariance2& sigma0,
                                    const VelocityForecast& vf, double dt,
                                    std::string obstacle_id = {}, double radius = 0.0);

/// First differences divided by dt.
std::vector<Vec2> velocities_from_positions(std::span<const Vec2> positions, double dt);

}  // namespace umpc::forecast
