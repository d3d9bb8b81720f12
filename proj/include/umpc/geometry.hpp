#pragma once

/**
 * @file geometry.hpp
 * @brief Probabilistic forecast regions for 2-D obstacle positions.
 *
 * An obstacle position is modelled as N(mu, Sigma). The region that contains
 * it with probability p is the Mahalanobis ellipse d_M < s with
 * s = sqrt(-2 ln(1 - p)). For collision checks the ellipse semi-axes
 * s*sqrt(lambda_j) are each extended by the combined radius r + r_d, and the
 * robot must stay in the complement of the enlarged ellipse:
 *
 *     dp^T R diag(1 / (s sqrt(lambda_j) + r + r_d)^2) R^T dp >= 1.
 */

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace umpc {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

}  // namespace umpc

namespace umpc::geometry {

/// Determinant floor below which a covariance counts as singular.
inline constexpr double kPsdEpsilon = 1e-12;

/// Symmetric positive-semidefinite 2x2 covariance (m^2).
class Covariance2 {
 public:
  Covariance2() = default;

  /// Throws std::invalid_argument if the entries are non-finite or not PSD.
  Covariance2(double xx, double xy, double yy);

  /// Symmetrizes `m` before validating.
  static Covariance2 from_matrix(const Mat2& m);
  static Covariance2 isotropic(double variance) { return {variance, 0.0, variance}; }

  double xx() const { return xx_; }
  double xy() const { return xy_; }
  double yy() const { return yy_; }
  double det() const { return xx_ * yy_ - xy_ * xy_; }
  double trace() const { return xx_ + yy_; }
  Mat2 matrix() const;

  /// R(angle) Sigma R(angle)^T.
  Covariance2 rotated(double angle) const;

  friend Covariance2 operator+(const Covariance2& a, const Covariance2& b);
  /// Scaling by a non-negative factor.
  friend Covariance2 operator*(double k, const Covariance2& c);
  friend bool operator==(const Covariance2&, const Covariance2&) = default;

 private:
  double xx_ = 0.0;
  double xy_ = 0.0;
  double yy_ = 0.0;
};

/// Eigenpairs of a Covariance2, lambda1 >= lambda2, (v1, v2) right-handed.
struct EigenDecomp2 {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Vec2 v1 = Vec2::UnitX();
  Vec2 v2 = Vec2::UnitY();

  /// R = [v1 v2].
  Mat2 rotation() const;
};

struct ChanceLevel {
  double p = 0.0;
  double s = 0.0;
};

/// s = sqrt(-2 ln(1 - p)), the chi^2_2 quantile root. Throws std::domain_error
/// unless 0 < p < 1.
ChanceLevel chi2_threshold(double p);

/// (x - mu)^T Sigma^{-1} (x - mu). Throws SingularCovarianceError if
/// det(Sigma) <= kPsdEpsilon.
double mahalanobis_sq(const Vec2& x, const Vec2& mu, const Covariance2& sigma);

/// Closed-form symmetric eigendecomposition. Repeated eigenvalues return the
/// identity basis.
EigenDecomp2 eig_sym_2x2(const Covariance2& sigma);

/// Enlarged confidence ellipse used as a keep-out region.
struct ForecastEllipse {
  Vec2 center = Vec2::Zero();
  Mat2 rot = Mat2::Identity();
  /// 1 / (s sqrt(lambda_j) + r + r_d)^2 for j = 1, 2.
  Vec2 inv_len_sq = Vec2::Ones();
  EigenDecomp2 raw;
  double enlargement = 0.0;

  Vec2 semi_axes() const;
  /// R diag(inv_len_sq) R^T.
  Mat2 shape_matrix() const;
};

/// Inverse squared semi-axes for threshold `s` and combined radius `r_sum`.
Vec2 enlarged_inv_len_sq(const EigenDecomp2& eig, double s, double r_sum);

ForecastEllipse build_forecast_ellipse(const Vec2& mu, const Covariance2& sigma,
                                       const ChanceLevel& chance, double r_robot,
                                       double r_obstacle);

/// g = dp^T R Lambda^{-1} R^T dp with dp = p_robot - center. g >= 1 means the
/// point lies in the feasible exterior.
double constraint_value(const ForecastEllipse& ellipse, const Vec2& p_robot);

struct ConstraintEval {
  double value = 0.0;
  Vec2 gradient = Vec2::Zero();  // dg/dp
};

ConstraintEval constraint_value_and_gradient(const ForecastEllipse& ellipse,
                                             const Vec2& p_robot);

/// True iff p_robot is outside every ellipse (vacuously true for none).
bool in_complement_all(std::span<const ForecastEllipse> ellipses, const Vec2& p_robot);

/// Bonferroni joint forecast rectangle, axis-aligned in the eigenframe.
struct ForecastRectangle {
  Vec2 center = Vec2::Zero();
  Mat2 rot = Mat2::Identity();
  Vec2 half_widths = Vec2::Zero();

  double area() const { return 4.0 * half_widths.x() * half_widths.y(); }
  std::array<Vec2, 4> corners() const;
};

/// Per-axis intervals mu'_j +- z_{1-(1-p)/4} sqrt(lambda_j). Throws
/// SingularCovarianceError for a singular Sigma and std::domain_error for p
/// outside (0, 1).
ForecastRectangle rectangle_region(const Vec2& mu, const Covariance2& sigma, double p);

/// Area pi s^2 sqrt(lambda1 lambda2) of the un-enlarged confidence ellipse.
double confidence_ellipse_area(const Covariance2& sigma, const ChanceLevel& chance);

inline constexpr int kMinkowskiSamples = 16384;

/// Radius along eigenframe direction `theta` of the true Minkowski sum of the
/// base ellipse (semi-axis a along x, b along y) with a disk of radius r. Computed
/// from the parametric offset curve: dense sampling brackets the ray
/// crossing, then bisection refines it.
double minkowski_radius(double a, double b, double r, double theta,
                        int samples = kMinkowskiSamples);

/// Enlarged-ellipse radius minus Minkowski-sum radius along eigenframe angle
/// `theta`. Negative values mean the enlarged ellipse under-covers.
double enlargement_error(const Covariance2& sigma, const ChanceLevel& chance, double r_sum,
                         double theta);

/// Closed polyline (first point repeated at the end) of an ellipse.
std::vector<Vec2> ellipse_polyline(const Vec2& center, const Mat2& rot, const Vec2& semi_axes,
                                   int segments = 96);

}  // namespace umpc::geometry
