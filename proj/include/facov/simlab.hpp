#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facov/model.hpp"
#include "facov/tuning.hpp"

namespace facov {

enum class SimModel { banded, approx_sparse };
enum class Method { emapg, mmem, hml, pc };

const char* sim_model_name(SimModel m);
const char* method_name(Method m);
SolverMode method_mode(Method m);

struct SimSpec {
  SimModel model = SimModel::banded;
  Eigen::Index n = 50;
  Eigen::Index p = 50;
  Eigen::Index r = 2;
  int replications = 100;
  std::uint64_t seed = 0;
};

/// One synthetic draw together with the generating truth.
struct SimData {
  ObservationSet y;
  Eigen::MatrixXd lambda;   // p x r
  Eigen::MatrixXd factors;  // n x r
  SymMatrix sigma_e;        // exact error covariance of the draw
};

/**
 * Banded design: errors are an MA(3)-style mix of iid normals with random
 * coefficients drawn from 0.7 N(0,1), so the exact Sigma_e (bandwidth 3) is
 * available in closed form per replication.  Factors iid N(0,1), loadings
 * iid uniform on [0,1].
 */
SimData gen_model1(Eigen::Index n, Eigen::Index p, std::uint64_t seed, Eigen::Index r = 2);

/**
 * Approximately sparse design: Sigma_e = alpha I + M with M_ij = 0.5^|i-j|,
 * alpha chosen so cond(Sigma_e) = p exactly.
 */
SimData gen_model2(Eigen::Index n, Eigen::Index p, std::uint64_t seed, Eigen::Index r = 2);

/// Cosines of the principal angles between the column spaces of A and B,
/// descending in [0, 1]; invariant to invertible right-multiplication.
Eigen::VectorXd canonical_correlations(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// ||Sigma_hat - Sigma_true||_F / p.
double rmse(const SymMatrix& sigma_hat, const SymMatrix& sigma_true);

/// Strict non-positive-definiteness flags (min eigenvalue <= 0).
struct NpdFlags {
  bool sigma_e_npd = false;
  bool sigma_y_npd = false;
};
NpdFlags npd_flags(const FactorEstimate& est);

/// Factor scores for scoring/forecasting purposes.  Falls back to a general
/// inverse of Sigma_y when the unconstrained stand-in left the PD cone, so
/// its estimates can still be evaluated; an exactly singular Sigma_y yields
/// an empty matrix.
Eigen::MatrixXd best_effort_scores(const ObservationSet& data, const FactorEstimate& est);

struct ReplicationRecord {
  int replication = 0;
  Method method = Method::emapg;
  bool failed = false;
  std::string failure;
  double cc_loadings_mean = 0.0;
  double cc_loadings_min = 0.0;
  double cc_factors_mean = 0.0;
  double cc_factors_min = 0.0;
  double rmse_sigma_e = 0.0;
  bool sigma_e_npd = false;
  bool sigma_y_npd = false;
  bool converged = false;
  double lambda = 0.0;
};

struct MethodSummary {
  Method method = Method::emapg;
  int completed = 0;
  int failed = 0;
  double cc_loadings_mean = 0.0;
  double cc_factors_mean = 0.0;
  double rmse_mean = 0.0;
  double rmse_variance = 0.0;
  double npd_sigma_e_pct = 0.0;
  double npd_sigma_y_pct = 0.0;
  double seconds = 0.0;
};

struct MonteCarloReport {
  SimSpec spec;
  std::vector<ReplicationRecord> records;   // one per (replication, method)
  std::vector<MethodSummary> summaries;     // aggregated per method
};

/// Recomputes the per-method summaries from the stored records.
std::vector<MethodSummary> aggregate_records(const std::vector<ReplicationRecord>& records,
                                             const std::vector<Method>& methods);

/**
 * Runs the full experiment: per replication, generate data from the model,
 * fit every requested method (penalized methods pick lambda by K-fold CV on
 * that replication), and score against the generating truth.  Replications
 * run in parallel on independent RNG streams derived from (seed, index), so
 * the report is identical at any thread count.
 */
MonteCarloReport run_monte_carlo(const SimSpec& spec, const std::vector<Method>& methods,
                                 const SolverConfig& cfg, const CVConfig& cv, int threads = 1);

}  // namespace facov
