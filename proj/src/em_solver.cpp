#include "facov/em_solver.hpp"

#include <cmath>
#include <string>

namespace facov {

namespace {

/// Gamma = Sigma_y^{-1} Lambda.  Fast path goes through the Woodbury inverse;
/// when Sigma_e has left the PD cone (unconstrained stand-in), Sigma_y is
/// factored directly, and failure there means the E-step is undefined.
Eigen::MatrixXd compute_gamma(const FactorEstimate& est) {
  Eigen::MatrixXd lower;
  if (try_cholesky(est.sigma_e.dense(), lower)) {
    return woodbury_inverse(est.sigma_e, est.lambda).dense() * est.lambda;
  }
  SymMatrix sigma_y = est.implied_sigma_y();
  Eigen::MatrixXd ly;
  if (!try_cholesky(sigma_y.dense(), ly))
    throw Error(errc::npd_covariance, "e_step: implied Sigma_y is not positive definite");
  return cholesky_solve(ly, est.lambda);
}

/// Gamma for an indefinite but invertible Sigma_y.  Only the unconstrained
/// stand-in uses this, to keep iterating the way the absolute-determinant
/// formulation it replaces would.
bool gamma_general(const FactorEstimate& est, Eigen::MatrixXd& gamma) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(est.implied_sigma_y().dense());
  if (!lu.isInvertible()) return false;
  gamma = lu.inverse() * est.lambda;
  return true;
}

FactorEstimate pc_initial_estimate(const SampleStats& stats, Eigen::Index r, double delta) {
  EigenPair ep = eigen_sym(stats.s_y);
  if (ep.values[r - 1] <= 1e-12 * std::max(ep.values[0], 0.0))
    throw Error(errc::rank_deficient,
                "fit: sample covariance has rank below r; initialization failed");
  Eigen::MatrixXd lambda = ep.vectors.leftCols(r) *
                           ep.values.head(r).cwiseSqrt().asDiagonal();
  Eigen::VectorXd resid = stats.s_y.diagonal() -
                          lambda.rowwise().squaredNorm();
  FactorEstimate est;
  est.lambda = std::move(lambda);
  est.sigma_e = SymMatrix::from_diagonal(resid.cwiseMax(delta));
  return est;
}

}  // namespace

EStepQuantities e_step(const FactorEstimate& est) {
  const Eigen::Index r = est.r();
  Eigen::MatrixXd gamma = compute_gamma(est);
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(r, r) - est.lambda.transpose() * gamma;
  return EStepQuantities{std::move(gamma), SymMatrix::from_dense(omega)};
}

std::pair<SymMatrix, Eigen::MatrixXd> expected_moments(const SampleStats& stats,
                                                       const EStepQuantities& eq) {
  if (eq.gamma.rows() != stats.s_y.dim())
    throw Error(errc::dimension_mismatch, "expected_moments: dimension mismatch");
  Eigen::MatrixXd syg = stats.s_y.dense() * eq.gamma;
  Eigen::MatrixXd fft = eq.gamma.transpose() * syg + eq.omega.dense();
  return {SymMatrix::from_dense(fft), std::move(syg)};
}

Eigen::MatrixXd update_lambda(const SampleStats& stats, const EStepQuantities& eq) {
  auto [fft, syg] = expected_moments(stats, eq);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fft.dense());
  if (!lu.isInvertible())
    throw Error(errc::singular_system,
                "update_lambda: Omega + Gamma^T S_y Gamma is singular; try a smaller r");
  return syg * lu.inverse();
}

SymMatrix build_M(const SampleStats& stats, const Eigen::MatrixXd& lambda_new,
                  const EStepQuantities& eq) {
  const Eigen::Index p = stats.s_y.dim();
  if (lambda_new.rows() != p || eq.gamma.rows() != p)
    throw Error(errc::dimension_mismatch, "build_M: dimension mismatch");
  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(p, p) - lambda_new * eq.gamma.transpose();
  Eigen::MatrixXd m = proj * stats.s_y.dense() * proj.transpose() +
                      lambda_new * eq.omega.dense() * lambda_new.transpose();
  return SymMatrix::from_dense(m);
}

FactorEstimate identify_rotation(const FactorEstimate& est, bool* degenerate) {
  const Eigen::Index r = est.r();
  Eigen::MatrixXd lower = cholesky_pd(est.sigma_e.dense());
  Eigen::MatrixXd whitened = lower.triangularView<Eigen::Lower>().solve(est.lambda);
  SymMatrix q = SymMatrix::from_dense(whitened.transpose() * whitened);  // Lambda^T Sigma_e^{-1} Lambda
  EigenPair ep = eigen_sym(q);

  bool repeated = false;
  for (Eigen::Index k = 0; k + 1 < r; ++k)
    if (std::abs(ep.values[k] - ep.values[k + 1]) <= 1e-10 * std::max(1.0, std::abs(ep.values[k])))
      repeated = true;
  if (degenerate != nullptr) *degenerate = repeated;

  Eigen::MatrixXd rotated = est.lambda * ep.vectors;
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::Index imax = 0;
    rotated.col(j).cwiseAbs().maxCoeff(&imax);
    if (rotated(imax, j) < 0.0) rotated.col(j) = -rotated.col(j);
  }
  return FactorEstimate{std::move(rotated), est.sigma_e};
}

Eigen::MatrixXd factor_scores(const ObservationSet& data, const FactorEstimate& est) {
  if (data.p() != est.p())
    throw Error(errc::dimension_mismatch, "factor_scores: data/estimate dimension mismatch");
  Eigen::MatrixXd gamma = compute_gamma(est);
  Eigen::VectorXd ybar = data.rows.colwise().mean();
  Eigen::MatrixXd centered = data.rows.rowwise() - ybar.transpose();
  return centered * gamma;  // row i = Gamma^T (y_i - ybar)
}

std::pair<FactorEstimate, FitReport> fit(const ObservationSet& data, Eigen::Index r,
                                         const PenaltySpec& pen, const SolverConfig& cfg,
                                         const std::optional<FactorEstimate>& init) {
  cfg.validate();
  if (r < 1) throw Error(errc::invalid_argument, "fit: r must be >= 1");
  if (r > std::min(data.n(), data.p()))
    throw Error(errc::invalid_argument, "fit: r exceeds min(n, p)");
  SampleStats stats = sample_stats(data);
  if (pen.weights.dim() != data.p())
    throw Error(errc::dimension_mismatch, "fit: penalty weight dimension mismatch");

  const bool enforce_monotone = cfg.mode != SolverMode::unconstrained;

  FactorEstimate est = init.has_value() ? *init : pc_initial_estimate(stats, r, cfg.delta);
  if (est.p() != data.p() || est.r() != r)
    throw Error(errc::dimension_mismatch, "fit: initial estimate has wrong shape");

  FitReport report;
  report.objective_trace.push_back(penalized_objective(est, stats, pen));

  CovUpdateState cov_state;
  // Once the unconstrained stand-in leaves the PD cone the objective is no
  // longer defined; it keeps iterating on a general inverse (mirroring the
  // absolute-determinant formulation it replaces) until the iterates settle
  // or break down.  The trace is frozen at the last defined value.
  bool objective_defined = true;
  for (int sweep = 1; sweep <= cfg.em_max_iter; ++sweep) {
    FactorEstimate next = est;
    double objective = 0.0;
    bool stop_after = false;
    try {
      EStepQuantities eq;
      if (objective_defined) {
        eq = e_step(est);
      } else {
        Eigen::MatrixXd gamma;
        if (!gamma_general(est, gamma)) break;  // singular Sigma_y
        Eigen::MatrixXd omega =
            Eigen::MatrixXd::Identity(r, r) - est.lambda.transpose() * gamma;
        eq = EStepQuantities{std::move(gamma), SymMatrix::from_dense(omega)};
      }
      next.lambda = update_lambda(stats, eq);
      // Gamma and Omega are refreshed with the new loadings while Sigma_e is
      // still the old one before building M.
      EStepQuantities eq_mid;
      if (objective_defined) {
        eq_mid = e_step(FactorEstimate{next.lambda, est.sigma_e});
      } else {
        Eigen::MatrixXd gamma;
        if (!gamma_general(FactorEstimate{next.lambda, est.sigma_e}, gamma)) break;
        Eigen::MatrixXd omega =
            Eigen::MatrixXd::Identity(r, r) - next.lambda.transpose() * gamma;
        eq_mid = EStepQuantities{std::move(gamma), SymMatrix::from_dense(omega)};
      }
      SymMatrix m = build_M(stats, next.lambda, eq_mid);
      if (objective_defined) {
        next.sigma_e = covariance_update(est.sigma_e, m, pen, cfg, &cov_state);
      } else {
        // Wild phase of the stand-in: raw thresholded gradient steps at the
        // nominal step size, with no descent or PD safeguards, matching the
        // dynamics of the formulation this mode replaces.
        Eigen::FullPivLU<Eigen::MatrixXd> lu(est.sigma_e.dense());
        if (!lu.isInvertible()) break;
        Eigen::MatrixXd inv = lu.inverse();
        Eigen::MatrixXd grad = inv - inv * m.dense() * inv;
        SymMatrix mn = SymMatrix::from_dense(est.sigma_e.dense() - cfg.t_init * grad);
        next.sigma_e = solve_unconstrained(ProxProblem{mn, cfg.t_init, cfg.delta, pen});
      }
      if (!next.lambda.allFinite() || !next.sigma_e.dense().allFinite())
        break;  // the stand-in diverged; keep the last finite iterate
      if (objective_defined) {
        try {
          objective = penalized_objective(next, stats, pen);
        } catch (const Error& e) {
          if (enforce_monotone || e.code() != errc::npd_covariance) throw;
          objective_defined = false;
          report.stopped_on_npd = true;
        }
      }
    } catch (const Error& e) {
      if (!enforce_monotone &&
          (e.code() == errc::npd_covariance || e.code() == errc::singular_system)) {
        report.stopped_on_npd = true;
        break;  // stand-in broke down; keep the last iterate
      }
      throw;
    }

    if (objective_defined) {
      const double previous = report.objective_trace.back();
      if (enforce_monotone && objective > previous + 1e-8) {
        throw Error(errc::monotonicity_violation,
                    "fit: objective increased from " + std::to_string(previous) + " to " +
                        std::to_string(objective) + " at sweep " + std::to_string(sweep));
      }
      report.objective_trace.push_back(objective);
      if (std::abs(objective - previous) / std::max(1.0, std::abs(previous)) < cfg.em_tol) {
        report.converged = true;
        stop_after = true;
      }
    } else {
      // No objective to monitor; fall back to iterate stability.
      const double move = (next.lambda - est.lambda).norm() +
                          (next.sigma_e.dense() - est.sigma_e.dense()).norm();
      const double scale = std::max(1.0, est.lambda.norm() + est.sigma_e.dense().norm());
      if (move / scale < cfg.em_tol) stop_after = true;
    }

    est = next;
    report.iterations = sweep;
    if (stop_after) break;
  }

  // Identification needs Sigma_e^{-1}; skip it when the stand-in went NPD.
  Eigen::MatrixXd lower;
  if (try_cholesky(est.sigma_e.dense(), lower))
    est = identify_rotation(est, &report.rotation_degenerate);

  report.min_eig_sigma_e = min_eigenvalue(est.sigma_e);
  report.min_eig_sigma_y = min_eigenvalue(est.implied_sigma_y());
  return {std::move(est), std::move(report)};
}

}  // namespace facov
