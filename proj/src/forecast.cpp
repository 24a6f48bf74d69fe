#include "facov/forecast.hpp"

#include <cmath>
#include <string>

#include "facov/baselines.hpp"
#include "facov/parallel.hpp"
#include "facov/rng.hpp"

namespace facov {

void ForecastSpec::validate() const {
  if (horizon < 1) throw Error(errc::invalid_argument, "ForecastSpec: horizon must be >= 1");
  if (lags < 0) throw Error(errc::invalid_argument, "ForecastSpec: lags must be >= 0");
  if (n_origins < 1) throw Error(errc::invalid_argument, "ForecastSpec: need m >= 1");
  if (r < 1) throw Error(errc::invalid_argument, "ForecastSpec: need r >= 1");
  if (window < r + lags + 2)
    throw Error(errc::invalid_argument, "ForecastSpec: window must be >= r + lags + 2");
}

ForecastSeries gen_forecast_data(Eigen::Index p, Eigen::Index n, Eigen::Index m,
                                 std::uint64_t seed, const SyntheticForecastDesign& design) {
  if (p < 2 || n < 2 || m < 1)
    throw Error(errc::invalid_argument, "gen_forecast_data: sizes out of range");
  const Eigen::Index total = n + m;
  Rng rng(seed);

  // Error covariance and loadings follow the approximately-sparse design.
  Eigen::MatrixXd cov(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) cov(i, j) = std::pow(0.5, std::abs(double(i - j)));
  EigenPair ep = eigen_sym(SymMatrix::from_dense(cov));
  const double alpha =
      (ep.values[0] - static_cast<double>(p) * ep.values[p - 1]) / (static_cast<double>(p) - 1.0);
  cov.diagonal().array() += alpha;
  Eigen::MatrixXd chol = cholesky_pd(cov);

  Eigen::MatrixXd lambda(p, 2);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) lambda(i, j) = rng.uniform();

  ForecastSeries out;
  out.y.resize(total, p);
  out.x.resize(total);
  out.factors.resize(total, 2);

  const double stat_sd = std::sqrt(1.0 / (1.0 - design.rho * design.rho));
  Eigen::Vector2d f_prev{stat_sd * rng.normal(), stat_sd * rng.normal()};
  Eigen::VectorXd z(p);
  for (Eigen::Index s = 0; s < total; ++s) {
    out.x[s] = design.beta.dot(f_prev) + rng.normal();
    Eigen::Vector2d f = design.rho * f_prev + Eigen::Vector2d{rng.normal(), rng.normal()};
    for (Eigen::Index i = 0; i < p; ++i) z[i] = rng.normal();
    out.y.row(s) = (lambda * f + chol * z).transpose();
    out.factors.row(s) = f.transpose();
    f_prev = f;
  }
  return out;
}

OriginForecast forecast_from_scores(const Eigen::MatrixXd& window_scores,
                                    const Eigen::VectorXd& x, Eigen::Index origin,
                                    const ForecastSpec& spec) {
  const Eigen::Index n = spec.window;
  const Eigen::Index r = window_scores.cols();
  const int h = spec.horizon;
  const int l = spec.lags;
  if (window_scores.rows() != n)
    throw Error(errc::dimension_mismatch, "forecast_from_scores: scores do not span the window");

  // Score row (s - origin) carries time s; the regression uses times
  // s in [s_min, s_max] so responses never reach past origin + n - 1.
  const Eigen::Index s_min = std::max(origin, static_cast<Eigen::Index>(l) - 1);
  const Eigen::Index s_max = origin + n - 1 - h;
  const Eigen::Index count = s_max - s_min + 1;
  const Eigen::Index n_coef = 1 + r + l;
  if (count < n_coef)
    throw Error(errc::singular_regression,
                "forecast_from_scores: too few samples at origin " + std::to_string(origin));

  auto target = [&](Eigen::Index s) {
    double sum = 0.0;
    for (int i = 1; i <= h; ++i) sum += x[s + i];
    return sum / h;
  };

  Eigen::MatrixXd design(count, n_coef);
  Eigen::VectorXd response(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index s = s_min + k;
    design(k, 0) = 1.0;
    design.block(k, 1, 1, r) = window_scores.row(s - origin);
    for (int i = 1; i <= l; ++i) design(k, r + i) = x[s + 1 - i];
    response[k] = target(s);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < n_coef)
    throw Error(errc::singular_regression,
                "forecast_from_scores: rank-deficient regression at origin " +
                    std::to_string(origin));
  Eigen::VectorXd coef = qr.solve(response);

  const Eigen::Index s_star = origin + n - 1;
  Eigen::VectorXd predictor(n_coef);
  predictor[0] = 1.0;
  predictor.segment(1, r) = window_scores.row(s_star - origin);
  for (int i = 1; i <= l; ++i) predictor[r + i] = x[s_star + 1 - i];

  OriginForecast out;
  out.forecast = coef.dot(predictor);
  out.actual = target(s_star);
  return out;
}

namespace {

Eigen::MatrixXd window_scores_for(const Eigen::MatrixXd& y, Eigen::Index origin,
                                  const ForecastSpec& spec, const SolverConfig& cfg,
                                  double lambda) {
  Eigen::MatrixXd window = y.middleRows(origin, spec.window);
  ObservationSet obs = ObservationSet::from_matrix(std::move(window));
  if (spec.method == Method::pc) return pc_estimate(obs, spec.r).scores;
  if (spec.method == Method::hml) {
    auto [est, report] = hml_estimate(obs, spec.r, cfg);
    return factor_scores(obs, est);
  }
  SolverConfig mode_cfg = cfg;
  mode_cfg.mode = method_mode(spec.method);
  auto [est, report] =
      fit(obs, spec.r, PenaltySpec::lasso(obs.p(), lambda), mode_cfg);
  Eigen::MatrixXd scores = best_effort_scores(obs, est);
  if (scores.size() == 0)
    throw Error(errc::npd_covariance, "rolling_forecast: window estimate has singular Sigma_y");
  return scores;
}

double select_window_lambda(const Eigen::MatrixXd& y, Eigen::Index origin,
                            const ForecastSpec& spec, const SolverConfig& cfg,
                            const CVConfig& cv) {
  if (cv.lambda_grid.empty()) return 0.0;
  if (cv.lambda_grid.size() == 1) return cv.lambda_grid[0];
  Eigen::MatrixXd window = y.middleRows(origin, spec.window);
  ObservationSet obs = ObservationSet::from_matrix(std::move(window));
  SolverConfig mode_cfg = cfg;
  mode_cfg.mode = method_mode(spec.method);
  try {
    return select_lambda(obs, spec.r, PenaltySpec::lasso(obs.p(), 0.0).weights, mode_cfg, cv)
        .lambda_cv;
  } catch (const Error&) {
    return cv.lambda_grid[cv.lambda_grid.size() / 2];
  }
}

}  // namespace

ForecastResult rolling_forecast(const Eigen::MatrixXd& y, const Eigen::VectorXd& x,
                                const ForecastSpec& spec, const SolverConfig& cfg,
                                const CVConfig& cv, int threads) {
  spec.validate();
  const Eigen::Index m = spec.n_origins;
  const Eigen::Index needed_y = m - 1 + spec.window;
  const Eigen::Index needed_x = m - 1 + spec.window + spec.horizon;
  if (y.rows() < needed_y)
    throw Error(errc::invalid_argument, "rolling_forecast: panel too short for the windows");
  if (x.size() < needed_x)
    throw Error(errc::invalid_argument, "rolling_forecast: target series too short");

  const bool penalized = spec.method == Method::emapg || spec.method == Method::mmem;
  double shared_lambda = 0.0;
  if (penalized && !spec.per_origin_cv)
    shared_lambda = select_window_lambda(y, 0, spec, cfg, cv);

  ForecastResult result;
  result.lambda = shared_lambda;
  result.forecasts.resize(m);
  result.actuals.resize(m);
  result.sq_errors.resize(m);

  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t origin) {
    const auto t = static_cast<Eigen::Index>(origin);
    double lambda = shared_lambda;
    if (penalized && spec.per_origin_cv) lambda = select_window_lambda(y, t, spec, cfg, cv);
    Eigen::MatrixXd scores = window_scores_for(y, t, spec, cfg, lambda);
    OriginForecast f = forecast_from_scores(scores, x, t, spec);
    result.forecasts[origin] = f.forecast;
    result.actuals[origin] = f.actual;
    result.sq_errors[origin] = (f.actual - f.forecast) * (f.actual - f.forecast);
  });

  double sum = 0.0;
  for (double e : result.sq_errors) sum += e;
  result.mse = sum / static_cast<double>(m);
  return result;
}

double relative_mse(double method_mse, double pc_mse) {
  if (!(pc_mse > 0.0))
    throw Error(errc::invalid_argument, "relative_mse: benchmark MSE must be positive");
  return method_mse / pc_mse;
}

}  // namespace facov
