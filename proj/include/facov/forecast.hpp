#pragma once

#include <cstdint>
#include <vector>

#include "facov/simlab.hpp"

namespace facov {

/// Rolling-window diffusion-index forecasting setup.
struct ForecastSpec {
  int horizon = 1;       // h
  int lags = 0;          // l lags of the target series
  int n_origins = 1;     // m rolling forecasts
  Eigen::Index window = 50;  // training length n
  Eigen::Index r = 2;
  Method method = Method::emapg;
  bool per_origin_cv = false;  // re-select lambda at every origin

  void validate() const;
};

/// Synthetic two-factor design: x_{t+1} = beta' f_t + eps_t,
/// f_t = rho f_{t-1} + nu_t, errors with the approximately-sparse covariance.
struct SyntheticForecastDesign {
  Eigen::Vector2d beta{2.0, 3.0};
  double rho = 0.5;
};

struct ForecastSeries {
  Eigen::MatrixXd y;        // (n + m) x p panel
  Eigen::VectorXd x;        // length n + m target series; x[s] pairs with f_{s-1}
  Eigen::MatrixXd factors;  // (n + m) x 2 latent factors
};

/// Generates n + m periods; the factor chain starts from its stationary
/// distribution (variance I / (1 - rho^2)).  Deterministic under the seed.
ForecastSeries gen_forecast_data(Eigen::Index p, Eigen::Index n, Eigen::Index m,
                                 std::uint64_t seed,
                                 const SyntheticForecastDesign& design = {});

/**
 * Least-squares forecast at one origin from precomputed window scores.
 * Regresses the h-step-averaged target on an intercept, the lagged factor
 * scores, and l lags of the target, then extrapolates one step.  Only data
 * with time index <= origin + window - 1 enters the regression.
 */
struct OriginForecast {
  double forecast = 0.0;
  double actual = 0.0;
};
OriginForecast forecast_from_scores(const Eigen::MatrixXd& window_scores,
                                    const Eigen::VectorXd& x, Eigen::Index origin,
                                    const ForecastSpec& spec);

struct ForecastResult {
  std::vector<double> forecasts;
  std::vector<double> actuals;
  std::vector<double> sq_errors;
  double mse = 0.0;
  double lambda = 0.0;  // penalty level used (0 for pc / hml)
};

/**
 * Full rolling exercise: for each origin, estimate factors on the window
 * with the configured method, regress, forecast, and accumulate the MSE.
 * Penalized methods select lambda by CV on the first window and reuse it
 * unless per_origin_cv is set.  Origins run in parallel.
 */
ForecastResult rolling_forecast(const Eigen::MatrixXd& y, const Eigen::VectorXd& x,
                                const ForecastSpec& spec, const SolverConfig& cfg,
                                const CVConfig& cv, int threads = 1);

/// Ratio of a method's MSE to the PC benchmark's.
double relative_mse(double method_mse, double pc_mse);

}  // namespace facov
