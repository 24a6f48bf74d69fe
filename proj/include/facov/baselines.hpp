#pragma once

#include "facov/em_solver.hpp"
#include "facov/model.hpp"

namespace facov {

/// Principal-components estimate plus the implied factor scores.
struct PcResult {
  FactorEstimate est;
  Eigen::MatrixXd scores;  // n x r, rows D_r^{-1/2} V_r^T (y_i - ybar)
};

/**
 * PC benchmark from the top-r eigenpairs of S_y:
 * Lambda = V_r D_r^{1/2}, Sigma_e = diag(S_y - Lambda Lambda^T) floored at 1e-8.
 */
PcResult pc_estimate(const ObservationSet& data, Eigen::Index r);

/// Heteroscedastic ML: the EM fit restricted to diagonal Sigma_e, lambda = 0.
std::pair<FactorEstimate, FitReport> hml_estimate(const ObservationSet& data, Eigen::Index r,
                                                  const SolverConfig& cfg);

}  // namespace facov
