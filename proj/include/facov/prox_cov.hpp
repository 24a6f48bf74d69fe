#pragma once

#include <vector>

#include "facov/model.hpp"
#include "facov/numkit.hpp"

namespace facov {

/**
 * Covariance update machinery.
 *
 * One majorize-minimize step on
 *     min  log|Sigma| + tr(Sigma^{-1} M) + lambda ||W o Sigma||_1
 * linearizes the smooth part at Sigma_old into the gradient-step target
 *     Mn = Sigma_old - t (Sigma_old^{-1} - Sigma_old^{-1} M Sigma_old^{-1})
 * and leaves the proximal subproblem
 *     min_{Sigma >= delta I}  (1/2t) ||Sigma - Mn||_F^2 + lambda ||W o Sigma||_1.
 * The subproblem is solved through its Lagrangian dual with an accelerated
 * projected gradient method; the dual function
 *     g(Z) = Moreau-Yosida terms of the soft-threshold prox at X(Z) = Mn + t Z
 * has the 1-Lipschitz-after-scaling gradient
 *     grad g(Z) = S(X(Z), t lambda W) - delta I,
 * so each dual step is a soft-threshold followed by a PSD-cone projection.
 */

/// The MM-linearized proximal subproblem.
struct ProxProblem {
  SymMatrix mn;     // gradient-step target
  double t;         // depth of projection (MM step size)
  double delta;     // PD floor on the covariance
  PenaltySpec pen;

  void validate() const;
};

/// Dual APG iterate state: multiplier estimate, projected iterate, momentum.
struct DualState {
  SymMatrix z;
  SymMatrix y;
  double tk = 1.0;
  int k = 0;
};

struct ApgResult {
  SymMatrix sigma;    // recovered primal solution
  SymMatrix z_star;   // final dual iterate (PSD)
  int iters = 0;
  std::vector<double> dual_trace;  // f(Z_k) at each projected iterate, k = 1..iters
  double kkt_dual_feasibility = 0.0;   // max(0, -lambda_min(Z*))
  double kkt_primal_feasibility = 0.0; // max(0, delta - lambda_min(Sigma))
  double kkt_complementarity = 0.0;    // |<Z*, Sigma - delta I>|
};

/// Momentum recursion t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
double momentum_next(double tk);

/// Gradient-step target Mn = Sigma_old - t * grad[log|.| + tr(.^{-1} M)](Sigma_old).
SymMatrix linearize(const SymMatrix& sigma_old, const SymMatrix& m, double t);

/// Remark-1 shortcut: plain soft-threshold of Mn, no PD guarantee.
SymMatrix solve_unconstrained(const ProxProblem& prob);

/// grad g(Z) = S(Mn + t Z, t lambda W) - delta I.
SymMatrix dual_gradient(const SymMatrix& z, const ProxProblem& prob);

/// Dual objective f(Z) = g(Z) for PSD Z, evaluated from the displayed formula.
double dual_objective(const SymMatrix& z, const ProxProblem& prob);

/**
 * Accelerated projected gradient on the dual, started at Z_0 = 0 (or at the
 * PSD projection of *z0 when a warm start is supplied).
 * Stops when the projected iterate is stable and the KKT residuals
 * (dual feasibility, primal feasibility at delta, complementary slackness)
 * are all below 1e-6 (complementarity scaled by p).
 */
ApgResult apg_solve(const ProxProblem& prob, const SolverConfig& cfg,
                    const SymMatrix* z0 = nullptr);

/// Carry-over between consecutive covariance updates of one EM run: the last
/// dual iterate and the last accepted step size, both purely accelerative.
struct CovUpdateState {
  SymMatrix warm_z;
  double t_accepted = 0.0;
};

/**
 * Full covariance update for one EM sweep: linearize with backtracking on t
 * (halve while the exact objective at the candidate exceeds its value at
 * Sigma_old), then solve the subproblem in the configured mode.
 * In unconstrained mode an indefinite candidate is accepted as-is; that is
 * the behavior whose failure rate the constrained mode exists to fix.
 */
SymMatrix covariance_update(const SymMatrix& sigma_old, const SymMatrix& m,
                            const PenaltySpec& pen, const SolverConfig& cfg,
                            CovUpdateState* state = nullptr);

/// Exact objective of the covariance subproblem: log|Sigma| + tr(Sigma^{-1} M) + penalty.
double covariance_objective(const SymMatrix& sigma, const SymMatrix& m, const PenaltySpec& pen);

/**
 * Checks the O(1/k^2) suboptimality bound
 *     f(Z_k) - f(Z*) <= 2 ||Z_0 - Z*||_F^2 / (k+1)^2
 * on a recorded dual trace from a Z_0 = 0 run, with the final iterate
 * standing in for Z*.
 */
bool theorem1_rate_check(const ProxProblem& prob, const SymMatrix& z_star,
                         const std::vector<double>& dual_trace);

}  // namespace facov
