#include "facov/baselines.hpp"

namespace facov {

PcResult pc_estimate(const ObservationSet& data, Eigen::Index r) {
  if (r < 1 || r > std::min(data.n(), data.p()))
    throw Error(errc::invalid_argument, "pc_estimate: need 1 <= r <= min(n, p)");
  SampleStats stats = sample_stats(data);
  EigenPair ep = eigen_sym(stats.s_y);
  if (ep.values[r - 1] <= 1e-12 * std::max(ep.values[0], 0.0))
    throw Error(errc::rank_deficient, "pc_estimate: r exceeds the rank of S_y");

  Eigen::VectorXd top = ep.values.head(r);
  Eigen::MatrixXd vr = ep.vectors.leftCols(r);
  Eigen::MatrixXd lambda = vr * top.cwiseSqrt().asDiagonal();

  Eigen::VectorXd resid = stats.s_y.diagonal() - lambda.rowwise().squaredNorm();
  FactorEstimate est;
  est.lambda = lambda;
  est.sigma_e = SymMatrix::from_diagonal(resid.cwiseMax(1e-8));

  Eigen::MatrixXd centered = data.rows.rowwise() - stats.ybar.transpose();
  Eigen::MatrixXd scores = centered * vr * top.cwiseSqrt().cwiseInverse().asDiagonal();
  return PcResult{std::move(est), std::move(scores)};
}

std::pair<FactorEstimate, FitReport> hml_estimate(const ObservationSet& data, Eigen::Index r,
                                                  const SolverConfig& cfg) {
  SolverConfig diag_cfg = cfg;
  diag_cfg.mode = SolverMode::diagonal;
  return fit(data, r, PenaltySpec::lasso(data.p(), 0.0), diag_cfg);
}

}  // namespace facov
