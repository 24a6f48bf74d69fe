#pragma once

#include <optional>
#include <utility>

#include "facov/model.hpp"
#include "facov/prox_cov.hpp"

namespace facov {

/// Conditional-distribution quantities of the latent factors given the data:
/// Gamma = Sigma_y^{-1} Lambda and Omega = I_r - Lambda^T Gamma, so that
/// f_i | y_i ~ N(Gamma^T (y_i - ybar), Omega).
struct EStepQuantities {
  Eigen::MatrixXd gamma;  // p x r
  SymMatrix omega;        // r x r
};

EStepQuantities e_step(const FactorEstimate& est);

/// Conditional second moments divided by n:
///   FFt = Gamma^T S_y Gamma + Omega,  YFt = S_y Gamma.
std::pair<SymMatrix, Eigen::MatrixXd> expected_moments(const SampleStats& stats,
                                                       const EStepQuantities& eq);

/// Closed-form loading update  Lambda_new = S_y Gamma (Omega + Gamma^T S_y Gamma)^{-1}.
Eigen::MatrixXd update_lambda(const SampleStats& stats, const EStepQuantities& eq);

/// Target matrix of the covariance subproblem,
///   M = (I - Lambda_new Gamma^T) S_y (I - Lambda_new Gamma^T)^T + Lambda_new Omega Lambda_new^T.
SymMatrix build_M(const SampleStats& stats, const Eigen::MatrixXd& lambda_new,
                  const EStepQuantities& eq);

/**
 * Alternating estimation of (Lambda, Sigma_e): loading update, then
 * covariance update in the configured mode, until the relative change of the
 * penalized objective drops below em_tol.  The objective trace is
 * nonincreasing in constrained and diagonal modes; an increase beyond 1e-8
 * aborts with a structured error.  Unconstrained runs may leave the PD cone,
 * in which case the loop stops at the last computable iterate and flags the
 * report.  Identification is applied once after convergence.
 */
std::pair<FactorEstimate, FitReport> fit(const ObservationSet& data, Eigen::Index r,
                                         const PenaltySpec& pen, const SolverConfig& cfg,
                                         const std::optional<FactorEstimate>& init = std::nullopt);

/**
 * Rotates the loadings so Lambda^T Sigma_e^{-1} Lambda is diagonal with
 * descending entries; column signs make each column's largest-magnitude
 * entry positive.  Lambda Lambda^T (hence the objective) is unchanged.
 * Repeated eigenvalues make the ordering arbitrary; *degenerate is set.
 */
FactorEstimate identify_rotation(const FactorEstimate& est, bool* degenerate = nullptr);

/// Conditional-mean factor scores: row i is Gamma^T (y_i - ybar).
Eigen::MatrixXd factor_scores(const ObservationSet& data, const FactorEstimate& est);

}  // namespace facov
