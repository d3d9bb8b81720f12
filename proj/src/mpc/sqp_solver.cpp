#include "umpc/mpc/sqp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "umpc/mpc/dense_qp.hpp"

namespace umpc::mpc {
namespace {

using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;
constexpr double kSlackTolerance = 1e-9;
constexpr double kHessianResetStep = 0.25;
constexpr double kSlackProgress = 0.9;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double l1_violation(const VectorXd& eq, const VectorXd& ineq) {
  return eq.lpNorm<1>() + (-ineq).cwiseMax(0.0).sum();
}

double bound_violation(const TrajectoryNlp& nlp, const VectorXd& z) {
  return std::max((nlp.lower_bounds() - z).maxCoeff(), (z - nlp.upper_bounds()).maxCoeff());
}

// Function values and first derivatives at one iterate.
struct Evaluation {
  double f = 0.0;
  VectorXd grad;
  VectorXd eq;
  MatrixXd eq_jac;
  VectorXd ineq;
  MatrixXd ineq_jac;

  void values(const TrajectoryNlp& nlp, const VectorXd& z) {
    f = nlp.objective(z);
    eq = nlp.equality_residual(z);
    ineq = nlp.ellipse_values(z);
  }
  void derivatives(const TrajectoryNlp& nlp, const VectorXd& z) {
    grad = nlp.objective_gradient(z);
    eq_jac = nlp.equality_jacobian(z);
    ineq_jac = nlp.ellipse_jacobian(z);
  }
  double violation() const {
    double v = eq.size() ? eq.lpNorm<Eigen::Infinity>() : 0.0;
    if (ineq.size()) v = std::max(v, -ineq.minCoeff());
    return v;
  }
};

struct Multipliers {
  VectorXd eq;
  VectorXd ineq;
  VectorXd bounds;  // lower-bound multiplier minus upper-bound multiplier, per variable
};

// Condensed QP step with its multiplier estimates.
struct Step {
  VectorXd dz;
  VectorXd slack;  // elastic slacks of the ellipse rows
  Multipliers mult;
};

class SqpIteration {
 public:
  SqpIteration(const TrajectoryNlp& nlp, const SqpOptions& options)
      : nlp_(nlp), options_(options), nu_(2 * nlp.horizon()), nx_(5 * nlp.horizon()) {}

  // Builds and solves the condensed elastic QP at `z` with the given constant
  // terms of the linearized dynamics and ellipse rows. Raises `penalty` while
  // the QP needs elastic slack.
  Step compute_step(const VectorXd& z, const Evaluation& ev, const VectorXd& eq_const,
                    const VectorXd& ineq_const, const MatrixXd& hessian, double& penalty) const {
    const int n = nlp_.num_variables();
    const int nc = nu_ + 1;  // condensed variables (du, ds)
    const int m_el = static_cast<int>(ev.ineq.size());
    const int s_idx = nlp_.s_index();

    // Linearized dynamics: J_x dX = -(c + J_u dU), J_x unit lower triangular.
    const MatrixXd jx = ev.eq_jac.middleCols(nu_, nx_);
    const auto tri = jx.triangularView<Eigen::UnitLower>();
    const MatrixXd sens = tri.solve(-ev.eq_jac.leftCols(nu_));
    const VectorXd offset = tri.solve(-eq_const);

    MatrixXd basis = MatrixXd::Zero(n, nc);
    basis.topLeftCorner(nu_, nu_).setIdentity();
    basis.block(nu_, 0, nx_, nu_) = sens;
    basis(s_idx, nu_) = 1.0;
    VectorXd z0 = VectorXd::Zero(n);
    z0.segment(nu_, nx_) = offset;

    const MatrixXd hb = hessian * basis;
    const MatrixXd g_core = basis.transpose() * hb;
    const VectorXd grad_core = basis.transpose() * (ev.grad + hessian * z0);

    // Over w = (du, ds, t): simple bounds on du, ds and t, two-sided rows for
    // bounded states, elastic rows for the linearized ellipse constraints.
    const VectorXd& lb = nlp_.lower_bounds();
    const VectorXd& ub = nlp_.upper_bounds();
    const int nw = nc + m_el;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<int> state_rows;
    for (int j = nu_; j < nu_ + nx_; ++j) {
      if (std::isfinite(lb(j)) || std::isfinite(ub(j))) state_rows.push_back(j);
    }
    const auto n_state_rows = static_cast<int>(state_rows.size());
    const int rows = n_state_rows + m_el;

    DenseQp qp;
    qp.hessian = MatrixXd::Zero(nw, nw);
    qp.hessian.topLeftCorner(nc, nc) = 0.5 * (g_core + g_core.transpose());
    qp.gradient = VectorXd::Zero(nw);
    qp.gradient.head(nc) = grad_core;
    qp.x_lower = VectorXd::Constant(nw, -inf);
    qp.x_upper = VectorXd::Constant(nw, inf);
    qp.x_lower.head(nu_) = lb.head(nu_) - z.head(nu_);
    qp.x_upper.head(nu_) = ub.head(nu_) - z.head(nu_);
    qp.x_lower(nu_) = lb(s_idx) - z(s_idx);
    qp.x_upper(nu_) = ub(s_idx) - z(s_idx);
    qp.x_lower.tail(m_el).setZero();
    qp.constraints = MatrixXd::Zero(rows, nw);
    qp.lower = VectorXd::Constant(rows, -inf);
    qp.upper = VectorXd::Constant(rows, inf);
    for (int r = 0; r < n_state_rows; ++r) {
      const int j = state_rows[static_cast<std::size_t>(r)];
      qp.constraints.row(r).head(nc) = basis.row(j);
      qp.lower(r) = lb(j) - z(j) - z0(j);
      qp.upper(r) = ub(j) - z(j) - z0(j);
    }
    if (m_el > 0) {
      qp.constraints.block(n_state_rows, 0, m_el, nc) = ev.ineq_jac * basis;
      qp.constraints.block(n_state_rows, nc, m_el, m_el).setIdentity();
      qp.lower.tail(m_el) = -ineq_const - ev.ineq_jac * z0;
    }

    // Raise the penalty while the QP needs elastic slack and raising it still
    // removes a substantial part of that slack.
    auto slack_sum = [m_el](const QpResult& res) {
      return m_el > 0 ? res.x.tail(m_el).cwiseMax(0.0).sum() : 0.0;
    };
    auto solve_at = [&](double pen) {
      if (m_el > 0) qp.gradient.tail(m_el).setConstant(pen);
      return solve_dense_qp(qp);
    };
    QpResult qp_result = solve_at(penalty);
    while (penalty < options_.max_penalty &&
           (m_el > 0 && qp_result.x.tail(m_el).maxCoeff() > kSlackTolerance)) {
      const double raised = std::min(options_.max_penalty, 10.0 * penalty);
      QpResult candidate = solve_at(raised);
      const bool progress = slack_sum(candidate) < kSlackProgress * slack_sum(qp_result);
      penalty = raised;
      qp_result = std::move(candidate);
      if (!progress) break;
    }

    Step step;
    step.dz = basis * qp_result.x.head(nc) + z0;
    step.slack = m_el > 0 ? VectorXd(qp_result.x.tail(m_el).cwiseMax(0.0)) : VectorXd();
    step.mult.bounds = VectorXd::Zero(n);
    step.mult.bounds.head(nu_) = qp_result.bound_multipliers.head(nu_);
    step.mult.bounds(s_idx) = qp_result.bound_multipliers(nu_);
    for (int r = 0; r < n_state_rows; ++r) {
      step.mult.bounds(state_rows[static_cast<std::size_t>(r)]) = qp_result.row_multipliers(r);
    }
    step.mult.ineq = m_el > 0 ? VectorXd(qp_result.row_multipliers.tail(m_el)) : VectorXd();

    // Equality multipliers from the state rows of the QP stationarity
    // condition: J_x^T lambda_eq = (grad + H dz - J_in^T lambda_in - lambda_b)_X.
    VectorXd residual = ev.grad + hessian * step.dz - step.mult.bounds;
    if (m_el > 0) residual -= ev.ineq_jac.transpose() * step.mult.ineq;
    step.mult.eq = jx.transpose().triangularView<Eigen::UnitUpper>().solve(
        residual.segment(nu_, nx_));
    return step;
  }

 private:
  const TrajectoryNlp& nlp_;
  const SqpOptions& options_;
  int nu_;
  int nx_;
};

VectorXd lagrangian_gradient(const Evaluation& ev, const Multipliers& mult) {
  VectorXd g = ev.grad - ev.eq_jac.transpose() * mult.eq - mult.bounds;
  if (mult.ineq.size()) g -= ev.ineq_jac.transpose() * mult.ineq;
  return g;
}

void damped_bfgs_update(MatrixXd& h, const VectorXd& s, const VectorXd& y) {
  if (s.lpNorm<Eigen::Infinity>() < 1e-9) return;
  const VectorXd hs = h * s;
  const double shs = s.dot(hs);
  if (!(shs > 1e-16)) return;
  const double sy = s.dot(y);
  double theta = 1.0;
  if (sy < 0.2 * shs) theta = 0.8 * shs / (shs - sy);
  const VectorXd r = theta * y + (1.0 - theta) * hs;
  const double sr = s.dot(r);
  if (!(sr > 1e-16)) return;
  h += r * r.transpose() / sr - hs * hs.transpose() / shs;
  h = 0.5 * (h + h.transpose());
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::time_cap: return "time_cap";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

bool MpcSolution::feasible() const {
  return dynamics_residual <= kFeasibilityTolerance &&
         constraint_violation <= kFeasibilityTolerance;
}

double primal_violation(const TrajectoryNlp& nlp, const Eigen::VectorXd& z) {
  Evaluation ev;
  ev.values(nlp, z);
  return std::max({ev.violation(), bound_violation(nlp, z), 0.0});
}

MpcSolution solve(const TrajectoryNlp& nlp, const std::optional<MpcSolution>& warm_start,
                  const SqpOptions& options) {
  const auto start = Clock::now();
  const int n = nlp.num_variables();

  VectorXd z = warm_start ? nlp.pack(warm_start->states, warm_start->inputs, warm_start->s_opt)
                          : nlp.cold_start();
  auto clip = [&nlp](const VectorXd& v) -> VectorXd {
    return v.cwiseMax(nlp.lower_bounds()).cwiseMin(nlp.upper_bounds());
  };
  z = clip(z);

  MatrixXd initial_hessian = nlp.objective_hessian();
  for (int j = 0; j < n; ++j) {
    if (initial_hessian(j, j) <= 0.0) initial_hessian(j, j) = options.hessian_floor;
  }
  MatrixXd hessian = initial_hessian;

  const SqpIteration iteration(nlp, options);
  double penalty = options.initial_penalty;
  Evaluation ev;
  ev.values(nlp, z);
  ev.derivatives(nlp, z);

  SolveStatus status = SolveStatus::max_iter;
  std::optional<VectorXd> best;
  double best_objective = std::numeric_limits<double>::infinity();
  auto consider_best = [&](const VectorXd& candidate, const Evaluation& e) {
    if (e.violation() <= kFeasibilityTolerance && e.f < best_objective) {
      best = candidate;
      best_objective = e.f;
    }
  };
  consider_best(z, ev);

  double dual_residual = std::numeric_limits<double>::infinity();
  double slowest_iteration = 0.0;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double elapsed = seconds_since(start);
    if (options.time_cap > 0.0 && elapsed + slowest_iteration > options.time_cap) {
      status = SolveStatus::time_cap;
      break;
    }
    const auto iter_start = Clock::now();

    const Step step = iteration.compute_step(z, ev, ev.eq, ev.ineq, hessian, penalty);
    const double max_mult =
        std::max(step.mult.eq.lpNorm<Eigen::Infinity>(),
                 step.mult.ineq.size() ? step.mult.ineq.lpNorm<Eigen::Infinity>() : 0.0);
    penalty = std::min(options.max_penalty, std::max(penalty, 1.5 * max_mult));

    // l1 merit line search.
    const double viol = l1_violation(ev.eq, ev.ineq);
    const double merit = ev.f + penalty * viol;
    const double slack_sum = step.slack.size() ? step.slack.sum() : 0.0;
    const double slope = std::min(0.0, ev.grad.dot(step.dz) - penalty * (viol - slack_sum));
    double alpha = 1.0;
    VectorXd dz = step.dz;
    Evaluation trial;
    bool accepted = false;
    auto sufficient = [&](const Evaluation& e, double a) {
      const double trial_merit = e.f + penalty * l1_violation(e.eq, e.ineq);
      return trial_merit <= merit + kArmijo * a * slope + 1e-12 * std::abs(merit);
    };
    for (int k = 0; k < kMaxBacktracks; ++k) {
      dz = clip(z + alpha * step.dz) - z;
      trial.values(nlp, z + dz);
      if (sufficient(trial, alpha)) {
        accepted = true;
        break;
      }
      if (k == 0) {
        // Second-order correction against the curvature of the constraints.
        const VectorXd eq_soc = trial.eq - ev.eq_jac * step.dz;
        VectorXd ineq_soc = trial.ineq;
        if (ineq_soc.size()) ineq_soc -= ev.ineq_jac * step.dz;
        double soc_penalty = penalty;
        const Step soc = iteration.compute_step(z, ev, eq_soc, ineq_soc, hessian, soc_penalty);
        Evaluation soc_trial;
        const VectorXd soc_dz = clip(z + soc.dz) - z;
        soc_trial.values(nlp, z + soc_dz);
        if (sufficient(soc_trial, 1.0)) {
          accepted = true;
          dz = soc_dz;
          trial = std::move(soc_trial);
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      dz = clip(z + alpha * step.dz) - z;
      trial.values(nlp, z + dz);
    }

    const VectorXd z_next = z + dz;
    trial.derivatives(nlp, z_next);

    const VectorXd grad_lag_old = lagrangian_gradient(ev, step.mult);
    const VectorXd grad_lag_new = lagrangian_gradient(trial, step.mult);
    if (alpha < kHessianResetStep) {
      hessian = initial_hessian;
    } else {
      damped_bfgs_update(hessian, z_next - z, grad_lag_new - grad_lag_old);
    }

    z = z_next;
    ev = std::move(trial);
    consider_best(z, ev);

    // Convergence test with the QP multipliers at the new iterate.
    const double scale = 1.0 + ev.grad.lpNorm<Eigen::Infinity>();
    dual_residual = grad_lag_new.lpNorm<Eigen::Infinity>() / scale;
    double complementarity = 0.0;
    for (Eigen::Index k = 0; k < step.mult.ineq.size(); ++k) {
      complementarity = std::max(complementarity, std::abs(step.mult.ineq(k) * ev.ineq(k)));
    }
    complementarity /= scale;
    const double primal = std::max(ev.violation(), bound_violation(nlp, z));

    slowest_iteration = std::max(slowest_iteration, seconds_since(iter_start));
    if (primal <= options.primal_tolerance && dual_residual <= options.dual_tolerance &&
        complementarity <= options.dual_tolerance) {
      status = SolveStatus::optimal;
      ++iter;
      break;
    }
    const bool needs_slack = step.slack.size() && step.slack.maxCoeff() > kSlackTolerance;
    if (needs_slack && penalty >= options.max_penalty &&
        dz.lpNorm<Eigen::Infinity>() < 1e-9) {
      status = SolveStatus::infeasible;
      ++iter;
      break;
    }
    if (!accepted && primal > kFeasibilityTolerance && dz.lpNorm<Eigen::Infinity>() < 1e-12) {
      status = SolveStatus::infeasible;
      ++iter;
      break;
    }
  }

  if (status != SolveStatus::optimal && best) {
    z = *best;
    ev.values(nlp, z);
  }

  MpcSolution sol;
  sol.states = nlp.unpack_states(z);
  sol.inputs = nlp.unpack_inputs(z);
  sol.s_opt = z(nlp.s_index());
  sol.status = status;
  sol.objective = ev.f;
  sol.iterations = iter;
  sol.dynamics_residual = ev.eq.size() ? ev.eq.lpNorm<Eigen::Infinity>() : 0.0;
  sol.constraint_violation =
      std::max({ev.ineq.size() ? -ev.ineq.minCoeff() : 0.0, bound_violation(nlp, z), 0.0});
  sol.dual_residual = dual_residual;
  sol.wall_time = seconds_since(start);
  return sol;
}

}  // namespace umpc::mpc
