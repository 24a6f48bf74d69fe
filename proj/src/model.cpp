#include "facov/model.hpp"

#include <cmath>
#include <string>

namespace facov {

ObservationSet ObservationSet::from_matrix(Eigen::MatrixXd data) {
  if (data.rows() < 2) throw Error(errc::invalid_argument, "ObservationSet: need n >= 2");
  if (data.cols() < 1) throw Error(errc::invalid_argument, "ObservationSet: need p >= 1");
  if (!data.allFinite())
    throw Error(errc::invalid_argument, "ObservationSet: data contains a non-finite entry");
  return ObservationSet{std::move(data)};
}

SampleStats sample_stats(const ObservationSet& data) {
  const double n = static_cast<double>(data.n());
  Eigen::VectorXd ybar = data.rows.colwise().mean();
  Eigen::MatrixXd centered = data.rows.rowwise() - ybar.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / n;
  return SampleStats{std::move(ybar), SymMatrix::from_dense(cov)};
}

SymMatrix FactorEstimate::implied_sigma_y() const {
  Eigen::MatrixXd sy = lambda * lambda.transpose() + sigma_e.dense();
  return SymMatrix::from_dense(sy);
}

PenaltySpec PenaltySpec::make(double lambda, SymMatrix weights) {
  if (lambda < 0.0) throw Error(errc::invalid_argument, "PenaltySpec: lambda must be >= 0");
  if (!weights.all_nonnegative())
    throw Error(errc::invalid_argument, "PenaltySpec: weights must be entrywise nonnegative");
  if (!weights.zero_diagonal())
    throw Error(errc::invalid_argument, "PenaltySpec: weight diagonal must be zero");
  return PenaltySpec{lambda, std::move(weights)};
}

PenaltySpec PenaltySpec::lasso(Eigen::Index p, double lambda) {
  SymMatrix w(p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < i; ++j) w.set(i, j, 1.0);
  return make(lambda, std::move(w));
}

PenaltySpec PenaltySpec::adaptive(const SymMatrix& pilot, double lambda, double eps) {
  if (eps <= 0.0) throw Error(errc::invalid_argument, "PenaltySpec::adaptive: eps must be > 0");
  SymMatrix w(pilot.dim());
  for (Eigen::Index i = 0; i < pilot.dim(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      w.set(i, j, 1.0 / std::max(std::abs(pilot(i, j)), eps));
  return make(lambda, std::move(w));
}

double PenaltySpec::value(const SymMatrix& sigma) const {
  if (sigma.dim() != weights.dim())
    throw Error(errc::dimension_mismatch, "PenaltySpec::value: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < sigma.dim(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      sum += 2.0 * weights(i, j) * std::abs(sigma(i, j));
  return lambda * sum;
}

const char* mode_name(SolverMode mode) {
  switch (mode) {
    case SolverMode::constrained: return "constrained";
    case SolverMode::unconstrained: return "unconstrained";
    case SolverMode::diagonal: return "diagonal";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (delta <= 0.0) throw Error(errc::invalid_argument, "SolverConfig: delta must be > 0");
  if (em_tol <= 0.0 || apg_tol <= 0.0)
    throw Error(errc::invalid_argument, "SolverConfig: tolerances must be > 0");
  if (em_max_iter < 1 || apg_max_iter < 1)
    throw Error(errc::invalid_argument, "SolverConfig: iteration caps must be >= 1");
  if (t_init <= 0.0) throw Error(errc::invalid_argument, "SolverConfig: t_init must be > 0");
  if (backtrack_factor <= 0.0 || backtrack_factor >= 1.0)
    throw Error(errc::invalid_argument, "SolverConfig: backtrack_factor must be in (0, 1)");
}

double penalized_objective(const FactorEstimate& est, const SampleStats& stats,
                           const PenaltySpec& pen) {
  if (est.p() != stats.s_y.dim())
    throw Error(errc::dimension_mismatch, "penalized_objective: estimate/stats dimension mismatch");
  SymMatrix sigma_y = est.implied_sigma_y();

  double logdet = 0.0;
  try {
    logdet = logdet_pd(sigma_y);
  } catch (const Error& e) {
    if (e.code() == errc::not_positive_definite)
      throw Error(errc::npd_covariance,
                  std::string("penalized_objective: implied Sigma_y is not PD (") + e.what() + ")");
    throw;
  }

  // Sigma_y^{-1} through the Woodbury identity when Sigma_e is PD; otherwise
  // Sigma_y itself is PD here (logdet succeeded), so factor it directly.
  Eigen::MatrixXd sigma_y_inv;
  Eigen::MatrixXd lower;
  if (try_cholesky(est.sigma_e.dense(), lower)) {
    sigma_y_inv = woodbury_inverse(est.sigma_e, est.lambda).dense();
  } else {
    Eigen::MatrixXd ly = cholesky_pd(sigma_y.dense());
    sigma_y_inv = cholesky_solve(ly, Eigen::MatrixXd::Identity(est.p(), est.p()));
  }
  const double trace_term = (sigma_y_inv * stats.s_y.dense()).trace();
  return logdet + trace_term + pen.value(est.sigma_e);
}

}  // namespace facov
