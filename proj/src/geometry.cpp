#include "umpc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>
#include <boost/math/distributions/normal.hpp>

#include "umpc/errors.hpp"

namespace umpc::geometry {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("probability must lie in (0, 1), got " + std::to_string(p));
  }
}

double wrap_to_two_pi(double angle) {
  double wrapped = std::fmod(angle, kTwoPi);
  if (wrapped < 0.0) wrapped += kTwoPi;
  return wrapped;
}

// Offset point of the ellipse (a cos t, b sin t) pushed out by r along the
// outward normal. Requires b > 0.
Vec2 offset_point(double a, double b, double r, double t) {
  const double c = std::cos(t);
  const double s = std::sin(t);
  const Vec2 normal(b * c, a * s);
  return Vec2(a * c, b * s) + r * normal / normal.norm();
}

double polar_angle(const Vec2& q) {
  double angle = std::atan2(q.y(), q.x());
  if (angle < 0.0) angle += kTwoPi;
  return angle;
}

// Segment [-a, a] x {0} dilated by a disk of radius r, along direction theta.
double stadium_radius(double a, double r, double theta) {
  const double c = std::abs(std::cos(theta));
  const double s = std::abs(std::sin(theta));
  if (s * a <= r) {
    // Ray leaves through the circular cap around (a, 0).
    return a * c + std::sqrt(r * r - a * a * s * s);
  }
  return r / s;
}

}  // namespace

Covariance2::Covariance2(double xx, double xy, double yy) : xx_(xx), xy_(xy), yy_(yy) {
  if (!std::isfinite(xx) || !std::isfinite(xy) || !std::isfinite(yy)) {
    throw std::invalid_argument("covariance entries must be finite");
  }
  if (xx < 0.0 || yy < 0.0 || det() < -kPsdEpsilon) {
    throw std::invalid_argument("covariance is not positive semidefinite");
  }
}

Covariance2 Covariance2::from_matrix(const Mat2& m) {
  return {m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1)};
}

Mat2 Covariance2::matrix() const {
  Mat2 m;
  m << xx_, xy_, xy_, yy_;
  return m;
}

Covariance2 Covariance2::rotated(double angle) const {
  const Mat2 rot = Eigen::Rotation2Dd(angle).toRotationMatrix();
  return from_matrix(rot * matrix() * rot.transpose());
}

Covariance2 operator+(const Covariance2& a, const Covariance2& b) {
  return {a.xx_ + b.xx_, a.xy_ + b.xy_, a.yy_ + b.yy_};
}

Covariance2 operator*(double k, const Covariance2& c) {
  if (k < 0.0) throw std::invalid_argument("covariance scale must be non-negative");
  return {k * c.xx_, k * c.xy_, k * c.yy_};
}

Mat2 EigenDecomp2::rotation() const {
  Mat2 r;
  r.col(0) = v1;
  r.col(1) = v2;
  return r;
}

ChanceLevel chi2_threshold(double p) {
  require_probability(p);
  return {p, std::sqrt(-2.0 * std::log1p(-p))};
}

double mahalanobis_sq(const Vec2& x, const Vec2& mu, const Covariance2& sigma) {
  const double det = sigma.det();
  if (det <= kPsdEpsilon) {
    throw SingularCovarianceError("covariance determinant " + std::to_string(det) +
                                  " is below the singularity cutoff");
  }
  const Vec2 d = x - mu;
  const double q = sigma.yy() * d.x() * d.x() - 2.0 * sigma.xy() * d.x() * d.y() +
                   sigma.xx() * d.y() * d.y();
  return std::max(0.0, q / det);
}

EigenDecomp2 eig_sym_2x2(const Covariance2& sigma) {
  const double a = sigma.xx();
  const double b = sigma.xy();
  const double c = sigma.yy();
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);

  EigenDecomp2 eig;
  eig.lambda1 = mean + radius;
  eig.lambda2 = std::max(0.0, mean - radius);
  if (radius == 0.0) return eig;  // repeated eigenvalue: identity basis

  const double angle = 0.5 * std::atan2(2.0 * b, a - c);
  eig.v1 = Vec2(std::cos(angle), std::sin(angle));
  eig.v2 = Vec2(-eig.v1.y(), eig.v1.x());
  return eig;
}

Vec2 ForecastEllipse::semi_axes() const {
  return inv_len_sq.cwiseSqrt().cwiseInverse();
}

Mat2 ForecastEllipse::shape_matrix() const {
  return rot * inv_len_sq.asDiagonal() * rot.transpose();
}

Vec2 enlarged_inv_len_sq(const EigenDecomp2& eig, double s, double r_sum) {
  const double l1 = s * std::sqrt(eig.lambda1) + r_sum;
  const double l2 = s * std::sqrt(eig.lambda2) + r_sum;
  return {1.0 / (l1 * l1), 1.0 / (l2 * l2)};
}

ForecastEllipse build_forecast_ellipse(const Vec2& mu, const Covariance2& sigma,
                                       const ChanceLevel& chance, double r_robot,
                                       double r_obstacle) {
  if (!(r_robot > 0.0) || !(r_obstacle > 0.0)) {
    throw std::invalid_argument("robot and obstacle radii must be positive");
  }
  ForecastEllipse e;
  e.center = mu;
  e.raw = eig_sym_2x2(sigma);
  e.rot = e.raw.rotation();
  e.enlargement = r_robot + r_obstacle;
  e.inv_len_sq = enlarged_inv_len_sq(e.raw, chance.s, e.enlargement);
  return e;
}

double constraint_value(const ForecastEllipse& ellipse, const Vec2& p_robot) {
  const Vec2 local = ellipse.rot.transpose() * (p_robot - ellipse.center);
  return local.cwiseAbs2().dot(ellipse.inv_len_sq);
}

ConstraintEval constraint_value_and_gradient(const ForecastEllipse& ellipse,
                                             const Vec2& p_robot) {
  const Vec2 dp = p_robot - ellipse.center;
  const Vec2 local = ellipse.rot.transpose() * dp;
  ConstraintEval out;
  out.value = local.cwiseAbs2().dot(ellipse.inv_len_sq);
  out.gradient = 2.0 * ellipse.rot * ellipse.inv_len_sq.cwiseProduct(local);
  return out;
}

bool in_complement_all(std::span<const ForecastEllipse> ellipses, const Vec2& p_robot) {
  return std::all_of(ellipses.begin(), ellipses.end(), [&](const ForecastEllipse& e) {
    return constraint_value(e, p_robot) >= 1.0;
  });
}

std::array<Vec2, 4> ForecastRectangle::corners() const {
  const Vec2 hx = rot.col(0) * half_widths.x();
  const Vec2 hy = rot.col(1) * half_widths.y();
  return {center + hx + hy, center - hx + hy, center - hx - hy, center + hx - hy};
}

ForecastRectangle rectangle_region(const Vec2& mu, const Covariance2& sigma, double p) {
  require_probability(p);
  if (sigma.det() <= kPsdEpsilon) {
    throw SingularCovarianceError("rectangle region needs a positive definite covariance");
  }
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 1.0 - (1.0 - p) / 4.0);
  const EigenDecomp2 eig = eig_sym_2x2(sigma);
  ForecastRectangle rect;
  rect.center = mu;
  rect.rot = eig.rotation();
  rect.half_widths = Vec2(z * std::sqrt(eig.lambda1), z * std::sqrt(eig.lambda2));
  return rect;
}

double confidence_ellipse_area(const Covariance2& sigma, const ChanceLevel& chance) {
  const EigenDecomp2 eig = eig_sym_2x2(sigma);
  return std::numbers::pi * chance.s * chance.s * std::sqrt(eig.lambda1 * eig.lambda2);
}

double minkowski_radius(double a, double b, double r, double theta, int samples) {
  if (a < 0.0 || b < 0.0 || r < 0.0) throw std::invalid_argument("lengths must be non-negative");
  if (samples < 4) throw std::invalid_argument("need at least 4 boundary samples");
  const double target = wrap_to_two_pi(theta);
  if (a == 0.0 && b == 0.0) return r;
  if (b == 0.0) return stadium_radius(a, r, target);
  if (a == 0.0) return stadium_radius(b, r, target - std::numbers::pi / 2);

  // Polar angle of the offset curve increases monotonically with t, from 0
  // at t = 0 to 2 pi at t = 2 pi.
  std::vector<double> angles(static_cast<std::size_t>(samples) + 1);
  const double step = kTwoPi / samples;
  for (int k = 0; k < samples; ++k) {
    angles[static_cast<std::size_t>(k)] = k == 0 ? 0.0 : polar_angle(offset_point(a, b, r, k * step));
  }
  angles.back() = kTwoPi;

  const auto upper = std::upper_bound(angles.begin(), angles.end(), target);
  const auto k = static_cast<int>(std::distance(angles.begin(), upper)) - 1;
  double lo = std::clamp(k, 0, samples - 1) * step;
  double hi = lo + step;
  if (angles[static_cast<std::size_t>(std::clamp(k, 0, samples))] == target) {
    return offset_point(a, b, r, lo).norm();
  }
  for (int iter = 0; iter < 100 && hi - lo > 1e-16; ++iter) {
    const double mid = 0.5 * (lo + hi);
    double angle = polar_angle(offset_point(a, b, r, mid));
    if (mid > std::numbers::pi && angle < std::numbers::pi / 2) angle += kTwoPi;
    if (angle < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return offset_point(a, b, r, 0.5 * (lo + hi)).norm();
}

double enlargement_error(const Covariance2& sigma, const ChanceLevel& chance, double r_sum,
                         double theta) {
  if (!(r_sum > 0.0)) throw std::invalid_argument("r_sum must be positive");
  const EigenDecomp2 eig = eig_sym_2x2(sigma);
  const double a = chance.s * std::sqrt(eig.lambda1);
  const double b = chance.s * std::sqrt(eig.lambda2);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double ea = a + r_sum;
  const double eb = b + r_sum;
  const double enlarged = 1.0 / std::sqrt(c * c / (ea * ea) + s * s / (eb * eb));
  return enlarged - minkowski_radius(a, b, r_sum, theta);
}

std::vector<Vec2> ellipse_polyline(const Vec2& center, const Mat2& rot, const Vec2& semi_axes,
                                   int segments) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(segments) + 1);
  for (int k = 0; k <= segments; ++k) {
    const double t = kTwoPi * (k % segments) / segments;
    out.push_back(center + rot * Vec2(semi_axes.x() * std::cos(t), semi_axes.y() * std::sin(t)));
  }
  return out;
}

}  // namespace umpc::geometry
