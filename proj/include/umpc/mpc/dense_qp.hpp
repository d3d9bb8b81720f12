#pragma once

#include <Eigen/Core>

namespace umpc::mpc {

/// minimize 0.5 x^T H x + g^T x
/// subject to  x_lower <= x <= x_upper  and  lower <= C x <= upper.
///
/// Infinite bounds are ignored; empty bound vectors mean no bounds of that
/// kind. H must be positive semidefinite and positive definite on the null
/// space of the active constraints.
struct DenseQp {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::VectorXd x_lower;
  Eigen::VectorXd x_upper;
  Eigen::MatrixXd constraints;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;  // on scaled residuals and complementarity
};

struct QpResult {
  Eigen::VectorXd x;
  /// Lower-side minus upper-side multiplier, one per row of C.
  Eigen::VectorXd row_multipliers;
  /// Lower-side minus upper-side multiplier, one per variable.
  Eigen::VectorXd bound_multipliers;
  int iterations = 0;
  bool converged = false;
};

/// Mehrotra predictor-corrector interior-point method on the normal
/// equations. Returns the iterate with the smallest residual if it does not
/// converge within the iteration limit.
QpResult solve_dense_qp(const DenseQp& qp, const QpOptions& options = {});

}  // namespace umpc::mpc
