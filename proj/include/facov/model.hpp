#pragma once

#include <Eigen/Dense>
#include <vector>

#include "facov/numkit.hpp"

namespace facov {

/// Raw data: n observation rows, p variable columns. All entries finite.
struct ObservationSet {
  Eigen::MatrixXd rows;  // n x p

  static ObservationSet from_matrix(Eigen::MatrixXd data);

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index p() const { return rows.cols(); }
};

/// Sample mean and the 1/n sample covariance.
struct SampleStats {
  Eigen::VectorXd ybar;
  SymMatrix s_y;
};

SampleStats sample_stats(const ObservationSet& data);

/// A fitted factor model: p x r loadings and the error covariance.
struct FactorEstimate {
  Eigen::MatrixXd lambda;  // p x r
  SymMatrix sigma_e;       // p x p

  Eigen::Index p() const { return lambda.rows(); }
  Eigen::Index r() const { return lambda.cols(); }

  /// Implied covariance Lambda Lambda^T + Sigma_e.
  SymMatrix implied_sigma_y() const;
};

/**
 * Weighted L1 penalty lambda * ||W o Sigma_e||_1.
 * W is entrywise nonnegative with a zero diagonal, so diagonal entries are
 * never penalized.  The norm runs over all p^2 entries: each off-diagonal
 * pair contributes twice.
 */
struct PenaltySpec {
  double lambda = 0.0;
  SymMatrix weights;

  static PenaltySpec make(double lambda, SymMatrix weights);

  /// LASSO weights: 1 on every off-diagonal entry, 0 on the diagonal.
  static PenaltySpec lasso(Eigen::Index p, double lambda);

  /// Adaptive weights 1 / max(|pilot_ij|, eps) off-diagonal from a pilot
  /// covariance estimate.
  static PenaltySpec adaptive(const SymMatrix& pilot, double lambda, double eps = 1e-4);

  double value(const SymMatrix& sigma) const;
};

enum class SolverMode {
  constrained,    // dual APG update, Sigma_e kept >= delta I
  unconstrained,  // plain soft-threshold update, no PD guarantee
  diagonal,       // Sigma_e restricted to diagonal matrices (strict model)
};

const char* mode_name(SolverMode mode);

struct SolverConfig {
  double delta = 1e-5;
  SolverMode mode = SolverMode::constrained;
  int em_max_iter = 500;
  double em_tol = 1e-6;
  int apg_max_iter = 5000;
  double apg_tol = 1e-7;
  double t_init = 0.1;
  double backtrack_factor = 0.5;
  // Uses the momentum direction Algorithm 1 prints, (Y_{k+1} + Y_k), instead
  // of the standard (Y_{k+1} - Y_k).  Comparison only; breaks the O(1/k^2)
  // rate.
  bool printed_momentum_sign = false;

  void validate() const;
};

struct FitReport {
  std::vector<double> objective_trace;  // penalized objective, one entry per EM sweep + initial
  int iterations = 0;
  bool converged = false;
  double min_eig_sigma_e = 0.0;
  double min_eig_sigma_y = 0.0;
  // Unconstrained runs stop early when the implied Sigma_y is no longer PD.
  bool stopped_on_npd = false;
  // Identification hit (numerically) repeated eigenvalues; ordering arbitrary.
  bool rotation_degenerate = false;
};

/**
 * Penalized negative log-likelihood (up to affine constants):
 *   log|Lambda Lambda^T + Sigma_e| + tr((Lambda Lambda^T + Sigma_e)^{-1} S_y)
 *   + lambda ||W o Sigma_e||_1
 * Throws errc::npd_covariance when the implied Sigma_y is not PD.
 */
double penalized_objective(const FactorEstimate& est, const SampleStats& stats,
                           const PenaltySpec& pen);

}  // namespace facov
