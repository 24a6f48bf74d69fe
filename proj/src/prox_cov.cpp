#include "facov/prox_cov.hpp"

#include <cmath>
#include <sstream>

namespace facov {

namespace {

constexpr double kKktTol = 1e-6;
constexpr int kMaxHalvings = 60;

SymMatrix threshold_matrix(const ProxProblem& prob) {
  SymMatrix th(prob.pen.weights.dim());
  const double scale = prob.t * prob.pen.lambda;
  for (Eigen::Index i = 0; i < th.dim(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) th.set(i, j, scale * prob.pen.weights(i, j));
  return th;
}

/// Gradient-step target from a general (possibly indefinite but invertible)
/// Sigma_old; used only by the unconstrained stand-in once PD is lost.
SymMatrix linearize_general(const SymMatrix& sigma_old, const SymMatrix& m, double t) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma_old.dense());
  if (!lu.isInvertible())
    throw Error(errc::singular_system, "linearize: Sigma_old is singular");
  Eigen::MatrixXd inv = lu.inverse();
  Eigen::MatrixXd grad = inv - inv * m.dense() * inv;
  return SymMatrix::from_dense(sigma_old.dense() - t * grad);
}

bool is_pd(const SymMatrix& a) {
  Eigen::MatrixXd lower;
  return try_cholesky(a.dense(), lower);
}

}  // namespace

double momentum_next(double tk) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk)); }

void ProxProblem::validate() const {
  if (t <= 0.0) throw Error(errc::invalid_argument, "ProxProblem: t must be > 0");
  if (delta <= 0.0) throw Error(errc::invalid_argument, "ProxProblem: delta must be > 0");
  if (pen.weights.dim() != mn.dim())
    throw Error(errc::dimension_mismatch, "ProxProblem: weight/target dimension mismatch");
}

SymMatrix linearize(const SymMatrix& sigma_old, const SymMatrix& m, double t) {
  if (sigma_old.dim() != m.dim())
    throw Error(errc::dimension_mismatch, "linearize: dimension mismatch");
  if (t <= 0.0) throw Error(errc::invalid_argument, "linearize: t must be > 0");
  Eigen::MatrixXd lower = cholesky_pd(sigma_old.dense());
  const Eigen::Index p = sigma_old.dim();
  Eigen::MatrixXd inv = cholesky_solve(lower, Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd grad = inv - inv * m.dense() * inv;
  return SymMatrix::from_dense(sigma_old.dense() - t * grad);
}

SymMatrix solve_unconstrained(const ProxProblem& prob) {
  prob.validate();
  return soft_threshold(prob.mn, threshold_matrix(prob));
}

SymMatrix dual_gradient(const SymMatrix& z, const ProxProblem& prob) {
  prob.validate();
  if (z.dim() != prob.mn.dim())
    throw Error(errc::dimension_mismatch, "dual_gradient: dimension mismatch");
  Eigen::MatrixXd x = prob.mn.dense() + prob.t * z.dense();
  SymMatrix shrunk = soft_threshold(SymMatrix::from_dense(x), threshold_matrix(prob));
  Eigen::MatrixXd out = shrunk.dense();
  out.diagonal().array() -= prob.delta;
  return SymMatrix::from_dense(out);
}

double dual_objective(const SymMatrix& z, const ProxProblem& prob) {
  const Eigen::Index p = prob.mn.dim();
  Eigen::MatrixXd x = prob.mn.dense() + prob.t * z.dense();
  SymMatrix shrunk = soft_threshold(SymMatrix::from_dense(x), threshold_matrix(prob));
  const double inv2t = 1.0 / (2.0 * prob.t);

  Eigen::MatrixXd delta_eye = prob.delta * Eigen::MatrixXd::Identity(p, p);
  const double prox_term =
      inv2t * (shrunk.dense() - x).squaredNorm() + prob.pen.value(shrunk);
  const double const_term = inv2t * (delta_eye - prob.mn.dense()).squaredNorm();
  const double shift_term = inv2t * (x - delta_eye).squaredNorm();
  return -prox_term - const_term + shift_term;
}

ApgResult apg_solve(const ProxProblem& prob, const SolverConfig& cfg, const SymMatrix* z0) {
  prob.validate();
  const Eigen::Index p = prob.mn.dim();
  const SymMatrix thresholds = threshold_matrix(prob);
  const Eigen::MatrixXd mn = prob.mn.dense();

  auto primal_of = [&](const SymMatrix& dual) {
    Eigen::MatrixXd x = mn + prob.t * dual.dense();
    return soft_threshold(SymMatrix::from_dense(x), thresholds);
  };

  DualState state;
  state.z = SymMatrix(p);
  if (z0 != nullptr && z0->dim() == p) state.z = psd_project(*z0);
  state.y = state.z;
  SymMatrix y_prev = state.y;

  ApgResult result;
  double kkt_primal = 0.0;
  double kkt_gap = 0.0;

  for (state.k = 1; state.k <= cfg.apg_max_iter; ++state.k) {
    SymMatrix grad = dual_gradient(state.z, prob);
    SymMatrix y_next = psd_project(SymMatrix::from_dense(state.z.dense() - grad.dense()));

    const double t_next = momentum_next(state.tk);
    Eigen::MatrixXd step = cfg.printed_momentum_sign
                               ? (y_next.dense() + y_prev.dense()).eval()
                               : (y_next.dense() - y_prev.dense()).eval();
    // Extrapolated point is symmetrized to suppress floating-point drift.
    state.z = SymMatrix::from_dense(y_next.dense() +
                                    ((state.tk - 1.0) / t_next) * step);

    result.dual_trace.push_back(dual_objective(y_next, prob));

    const double change = (y_next.dense() - y_prev.dense()).norm();
    const double rel_change = change / std::max(1.0, y_prev.frobenius_norm());
    if (rel_change < cfg.apg_tol) {
      SymMatrix sigma = primal_of(y_next);
      kkt_primal = std::max(0.0, prob.delta - min_eigenvalue(sigma));
      Eigen::MatrixXd slack = sigma.dense();
      slack.diagonal().array() -= prob.delta;
      kkt_gap = std::abs((y_next.dense().array() * slack.array()).sum());
      if (kkt_primal < kKktTol && kkt_gap <= kKktTol * static_cast<double>(p)) {
        result.sigma = sigma;
        result.z_star = y_next;
        result.iters = state.k;
        result.kkt_dual_feasibility = std::max(0.0, -min_eigenvalue(y_next));
        result.kkt_primal_feasibility = kkt_primal;
        result.kkt_complementarity = kkt_gap;
        return result;
      }
    }

    y_prev = y_next;
    state.y = y_next;
    state.tk = t_next;
  }

  std::ostringstream msg;
  msg << "apg_solve: no convergence within " << cfg.apg_max_iter
      << " iterations (primal feasibility residual " << kkt_primal
      << ", complementarity " << kkt_gap << ")";
  throw Error(errc::non_convergence, msg.str());
}

double covariance_objective(const SymMatrix& sigma, const SymMatrix& m, const PenaltySpec& pen) {
  Eigen::MatrixXd lower = cholesky_pd(sigma.dense());
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) logdet += std::log(lower(i, i));
  const double trace_term = cholesky_solve(lower, m.dense()).trace();
  return 2.0 * logdet + trace_term + pen.value(sigma);
}

SymMatrix covariance_update(const SymMatrix& sigma_old, const SymMatrix& m,
                            const PenaltySpec& pen, const SolverConfig& cfg,
                            CovUpdateState* state) {
  if (sigma_old.dim() != m.dim())
    throw Error(errc::dimension_mismatch, "covariance_update: dimension mismatch");
  cfg.validate();

  if (cfg.mode == SolverMode::diagonal) {
    // Restricted to diagonal matrices the subproblem separates and the
    // minimizer is Sigma_ii = M_ii; the delta floor keeps the result usable
    // as a PD covariance in degenerate samples.
    Eigen::VectorXd d = m.diagonal().cwiseMax(cfg.delta);
    return SymMatrix::from_diagonal(d);
  }

  if (cfg.mode == SolverMode::unconstrained && !is_pd(sigma_old)) {
    // The stand-in has already left the PD cone; take the thresholded
    // gradient step without a descent check (the objective is undefined).
    SymMatrix mn = linearize_general(sigma_old, m, cfg.t_init);
    return solve_unconstrained(ProxProblem{mn, cfg.t_init, cfg.delta, pen});
  }

  const double f_old = covariance_objective(sigma_old, m, pen);
  // Resume near the last accepted step size; backtracking below still
  // guarantees descent, the carry-over only saves rejected trials.
  double t = cfg.t_init;
  if (state != nullptr && state->t_accepted > 0.0)
    t = std::min(cfg.t_init, state->t_accepted / cfg.backtrack_factor);
  const SymMatrix* warm =
      (state != nullptr && state->warm_z.dim() == sigma_old.dim()) ? &state->warm_z : nullptr;

  for (int halvings = 0; halvings <= kMaxHalvings; ++halvings, t *= cfg.backtrack_factor) {
    SymMatrix mn = linearize(sigma_old, m, t);
    ProxProblem prob{mn, t, cfg.delta, pen};
    SymMatrix candidate;
    if (cfg.mode == SolverMode::constrained) {
      // Analytic dual initializer P_+(delta I - Mn) / t: the exact multiplier
      // for lambda = 0 and a close start otherwise.  The carried-over iterate
      // can be far off when the active set changed, so start from whichever
      // candidate has the smaller dual objective.
      Eigen::MatrixXd violation = -mn.dense();
      violation.diagonal().array() += prob.delta;
      SymMatrix z_guess = psd_project(SymMatrix::from_dense(violation / t));
      const SymMatrix* z0 = &z_guess;
      if (warm != nullptr && dual_objective(*warm, prob) < dual_objective(z_guess, prob))
        z0 = warm;
      try {
        ApgResult res = apg_solve(prob, cfg, z0);
        candidate = res.sigma;
        if (state != nullptr) {
          state->warm_z = res.z_star;
          warm = &state->warm_z;
        }
      } catch (const Error& e) {
        if (e.code() != errc::non_convergence) throw;
        continue;  // inner solver stalled; a smaller step gives an easier dual
      }
    } else {
      candidate = solve_unconstrained(prob);
    }
    if (cfg.mode == SolverMode::unconstrained && !is_pd(candidate)) return candidate;
    double f_new;
    try {
      f_new = covariance_objective(candidate, m, pen);
    } catch (const Error& e) {
      if (e.code() != errc::not_positive_definite) throw;
      continue;  // constrained candidate at the numerical edge of the floor
    }
    if (f_new <= f_old + 1e-10) {
      if (state != nullptr) state->t_accepted = t;
      return candidate;
    }
  }
  throw Error(errc::backtracking_failed,
              "covariance_update: no descent after 60 step halvings");
}

bool theorem1_rate_check(const ProxProblem& prob, const SymMatrix& z_star,
                         const std::vector<double>& dual_trace) {
  const double f_star = dual_objective(z_star, prob);
  const double radius = z_star.frobenius_norm();  // ||Z_0 - Z*|| with Z_0 = 0
  for (std::size_t i = 0; i < dual_trace.size(); ++i) {
    const double k = static_cast<double>(i + 1);
    const double bound = 2.0 * radius * radius / ((k + 1.0) * (k + 1.0));
    if (dual_trace[i] - f_star > bound + 1e-8) return false;
  }
  return true;
}

}  // namespace facov
