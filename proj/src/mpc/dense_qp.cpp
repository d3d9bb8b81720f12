#include "umpc/mpc/dense_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

namespace umpc::mpc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest step in (0, 1] keeping v + step * dv >= 0.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

// One-sided constraints sign * (a^T x - bound) >= 0, where a is either a
// unit vector (simple bound) or a row of C.
class Sides {
 public:
  Sides(const DenseQp& qp, Index n) : c_(qp.constraints), n_(n) {
    auto add = [this](const VectorXd& bounds, bool row, double sign) {
      for (Index i = 0; i < bounds.size(); ++i) {
        if (std::isfinite(bounds(i))) {
          index_.push_back(i);
          row_.push_back(row);
          sign_.push_back(sign);
          bound_.push_back(bounds(i));
        }
      }
    };
    add(qp.x_lower, false, 1.0);
    add(qp.x_upper, false, -1.0);
    add(qp.lower, true, 1.0);
    add(qp.upper, true, -1.0);
  }

  Index size() const { return static_cast<Index>(index_.size()); }

  double bound_scale() const {
    double s = 0.0;
    for (double b : bound_) s = std::max(s, std::abs(b));
    return 1.0 + s;
  }

  // sign * (a^T x - bound) for every side.
  VectorXd values(const VectorXd& x) const {
    VectorXd v = apply(x);
    for (Index k = 0; k < size(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      v(k) -= sign_[i] * bound_[i];
    }
    return v;
  }

  // sign * a^T dx for every side.
  VectorXd apply(const VectorXd& dx) const {
    const VectorXd cx = c_.rows() > 0 ? VectorXd(c_ * dx) : VectorXd();
    VectorXd v(size());
    for (Index k = 0; k < size(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      v(k) = sign_[i] * (row_[i] ? cx(index_[i]) : dx(index_[i]));
    }
    return v;
  }

  // sum_k sign_k * w_k * a_k.
  VectorXd apply_transpose(const VectorXd& w) const {
    VectorXd out;
    VectorXd rows;
    split(w, out, rows);
    if (c_.rows() > 0) out.noalias() += c_.transpose() * rows;
    return out;
  }

  // H + sum_k w_k a_k a_k^T, lower triangle only.
  void normal_matrix(const MatrixXd& h, const VectorXd& w, MatrixXd& normal,
                     MatrixXd& scaled) const {
    VectorXd diag = VectorXd::Zero(n_);
    VectorXd rows = VectorXd::Zero(c_.rows());
    for (Index k = 0; k < size(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      (row_[i] ? rows : diag)(index_[i]) += w(k);
    }
    normal = h;
    normal.diagonal() += diag;
    if (c_.rows() > 0) {
      scaled.noalias() = c_.transpose() * rows.cwiseSqrt().asDiagonal();
      normal.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    }
  }

  // sum of sign_k * w_k grouped per variable and per row of C.
  void split(const VectorXd& w, VectorXd& vars, VectorXd& rows) const {
    vars = VectorXd::Zero(n_);
    rows = VectorXd::Zero(c_.rows());
    for (Index k = 0; k < size(); ++k) {
      const auto i = static_cast<std::size_t>(k);
      (row_[i] ? rows : vars)(index_[i]) += sign_[i] * w(k);
    }
  }

 private:
  const MatrixXd& c_;
  Index n_;
  std::vector<Index> index_;
  std::vector<bool> row_;
  std::vector<double> sign_;
  std::vector<double> bound_;
};

struct Direction {
  VectorXd dx;
  VectorXd dy;
  VectorXd dlambda;
};

void check_dimensions(const DenseQp& qp) {
  const Index n = qp.hessian.rows();
  const Index m = qp.constraints.rows();
  const bool ok = qp.hessian.cols() == n && qp.gradient.size() == n &&
                  (qp.x_lower.size() == 0 || qp.x_lower.size() == n) &&
                  (qp.x_upper.size() == 0 || qp.x_upper.size() == n) &&
                  (m == 0 || qp.constraints.cols() == n) &&
                  (qp.lower.size() == 0 || qp.lower.size() == m) &&
                  (qp.upper.size() == 0 || qp.upper.size() == m);
  if (!ok) throw std::invalid_argument("inconsistent QP dimensions");
}

}  // namespace

QpResult solve_dense_qp(const DenseQp& qp, const QpOptions& options) {
  check_dimensions(qp);
  const Index n = qp.hessian.rows();
  const Sides sides(qp, n);
  const Index m = sides.size();

  QpResult result;
  result.x = VectorXd::Zero(n);
  result.bound_multipliers = VectorXd::Zero(n);
  result.row_multipliers = VectorXd::Zero(qp.constraints.rows());
  if (m == 0) {
    result.x = qp.hessian.ldlt().solve(-qp.gradient);
    result.converged = true;
    return result;
  }

  VectorXd x = VectorXd::Zero(n);
  VectorXd y = VectorXd::Ones(m);
  VectorXd lambda = VectorXd::Ones(m);

  const double scale_d = 1.0 + qp.gradient.lpNorm<Eigen::Infinity>();
  const double scale_p = sides.bound_scale();
  const auto dm = static_cast<double>(m);

  double best_error = std::numeric_limits<double>::infinity();
  VectorXd best_lambda;
  Eigen::LLT<MatrixXd> llt;
  MatrixXd normal(n, n);
  MatrixXd scaled;
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const VectorXd r_d = qp.hessian * x + qp.gradient - sides.apply_transpose(lambda);
    const VectorXd r_p = sides.values(x) - y;
    const double mu = y.dot(lambda) / dm;
    const double gap = y.cwiseProduct(lambda).maxCoeff();
    const double error = std::max({r_d.lpNorm<Eigen::Infinity>() / scale_d,
                                   r_p.lpNorm<Eigen::Infinity>() / scale_p, gap / scale_d});
    if (iter > 0 && error < best_error) {
      best_error = error;
      result.x = x;
      best_lambda = lambda;
      result.iterations = iter;
    }
    if (iter > 0 && error <= options.tolerance) {
      result.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    sides.normal_matrix(qp.hessian, lambda.cwiseQuotient(y), normal, scaled);
    llt.compute(normal);
    if (llt.info() != Eigen::Success) {
      normal.diagonal().array() += 1e-10 * (1.0 + normal.diagonal().cwiseAbs().maxCoeff());
      llt.compute(normal);
    }

    // Newton system  H dx - A^T dl = -r_d,  A dx - dy = -r_p,  L dy + Y dl = rc,
    // reduced to the normal equations, plus one round of iterative refinement.
    auto reduced_solve = [&](const VectorXd& e_d, const VectorXd& e_p, const VectorXd& e_c) {
      Direction dir;
      const VectorXd rhs =
          -e_d + sides.apply_transpose((e_c - lambda.cwiseProduct(e_p)).cwiseQuotient(y));
      dir.dx = llt.solve(rhs);
      dir.dy = sides.apply(dir.dx) + e_p;
      dir.dlambda = (e_c - lambda.cwiseProduct(dir.dy)).cwiseQuotient(y);
      return dir;
    };
    auto solve_direction = [&](const VectorXd& rhs_c) {
      Direction dir = reduced_solve(r_d, r_p, rhs_c);
      const VectorXd res_d = qp.hessian * dir.dx - sides.apply_transpose(dir.dlambda) + r_d;
      const VectorXd res_p = sides.apply(dir.dx) - dir.dy + r_p;
      const VectorXd res_c = lambda.cwiseProduct(dir.dy) + y.cwiseProduct(dir.dlambda) - rhs_c;
      const Direction fix = reduced_solve(res_d, res_p, -res_c);
      dir.dx += fix.dx;
      dir.dy += fix.dy;
      dir.dlambda += fix.dlambda;
      return dir;
    };

    const Direction affine = solve_direction(-y.cwiseProduct(lambda));
    if (iter == 0) {
      // Shift the affine-scaling point into the interior as the starting point.
      x += affine.dx;
      y = (y + affine.dy).cwiseAbs().cwiseMax(1.0);
      lambda = (lambda + affine.dlambda).cwiseAbs().cwiseMax(1.0);
      continue;
    }
    const double alpha_aff = std::min(max_step(y, affine.dy), max_step(lambda, affine.dlambda));
    const double mu_aff =
        (y + alpha_aff * affine.dy).dot(lambda + alpha_aff * affine.dlambda) / dm;
    const double sigma = std::min(1.0, std::pow(mu_aff / mu, 3));

    const VectorXd rhs_c = -y.cwiseProduct(lambda) - affine.dy.cwiseProduct(affine.dlambda) +
                           VectorXd::Constant(m, sigma * mu);
    const Direction step = solve_direction(rhs_c);
    const double alpha =
        std::min(1.0, 0.995 * std::min(max_step(y, step.dy), max_step(lambda, step.dlambda)));

    x += alpha * step.dx;
    y = (y + alpha * step.dy).cwiseMax(1e-300);
    lambda = (lambda + alpha * step.dlambda).cwiseMax(1e-300);
  }
  if (best_lambda.size() == m) {
    sides.split(best_lambda, result.bound_multipliers, result.row_multipliers);
  }
  return result;
}

}  // namespace umpc::mpc
