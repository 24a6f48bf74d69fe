#pragma once

#include <cstdint>
#include <vector>

#include "facov/em_solver.hpp"
#include "facov/model.hpp"

namespace facov {

struct CVConfig {
  int k_folds = 5;
  std::vector<double> lambda_grid;  // ascending, positive
  std::uint64_t seed = 0;
  // Monte Carlo runs: select lambda on the first replication only and reuse
  // it, instead of cross-validating every replication.
  bool select_once = false;
};

struct CVRow {
  double lambda = 0.0;
  double mean_loss = 0.0;
  int failed_folds = 0;
  std::vector<double> fold_losses;  // +inf marks a failed fold
};

struct CVResult {
  double lambda_cv = 0.0;
  std::vector<CVRow> table;
};

/// Validation loss (1/n) log|Sigma_y_hat| + (1/n) tr(S_val Sigma_y_hat^{-1}).
double cv_loss(const FactorEstimate& est, const SymMatrix& s_val, Eigen::Index n);

/**
 * K-fold cross-validation over the lambda grid.  Folds are a seeded exact
 * partition of the observations; each holdout covariance is centered with
 * the full-sample mean.  A failed fold fit gives that lambda +inf loss.
 * Ties in mean loss go to the larger lambda.  Deterministic given the seed.
 */
CVResult select_lambda(const ObservationSet& data, Eigen::Index r, const SymMatrix& weights,
                       const SolverConfig& cfg, const CVConfig& cv, int threads = 1);

/// Default grid: 20 log-spaced points on [0.01, 1] times the largest
/// off-diagonal magnitude of S_y.
std::vector<double> default_lambda_grid(const SampleStats& stats, int points = 20);

}  // namespace facov
