#include "cli_commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "facov/baselines.hpp"
#include "facov/csv.hpp"
#include "facov/em_solver.hpp"
#include "facov/forecast.hpp"
#include "facov/parallel.hpp"
#include "facov/rng.hpp"
#include "facov/tuning.hpp"

namespace facov::cli {

namespace {

using nlohmann::json;

int effective_threads(const CommonOptions& common) {
  return common.threads > 0 ? common.threads : hardware_threads();
}

std::filesystem::path ensure_out_dir(const CommonOptions& common) {
  std::filesystem::path dir(common.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(errc::io_error, "cannot write '" + path.string() + "'");
  out << text;
}

json solver_json(const SolverConfig& cfg) {
  return json{{"delta", cfg.delta},
              {"mode", mode_name(cfg.mode)},
              {"em_max_iter", cfg.em_max_iter},
              {"em_tol", cfg.em_tol},
              {"apg_max_iter", cfg.apg_max_iter},
              {"apg_tol", cfg.apg_tol},
              {"t_init", cfg.t_init},
              {"backtrack_factor", cfg.backtrack_factor}};
}

CVConfig make_cv_config(const CommonOptions& common, const SampleStats& stats) {
  CVConfig cv;
  cv.k_folds = common.k_folds;
  cv.seed = common.seed;
  if (common.lambda >= 0.0)
    cv.lambda_grid = {common.lambda};
  else if (!common.lambda_grid.empty())
    cv.lambda_grid = common.lambda_grid;
  else
    cv.lambda_grid = default_lambda_grid(stats);
  return cv;
}

std::string csv_bool(bool v) { return v ? "1" : "0"; }

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return e.code() == errc::invalid_argument ? 2 : 1;  // 2 = usage error
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "emapg") return Method::emapg;
  if (name == "mmem" || name == "pml") return Method::mmem;
  if (name == "hml") return Method::hml;
  if (name == "pc") return Method::pc;
  throw Error(errc::invalid_argument, "unknown method '" + name + "'");
}

int cmd_simulate(const SimulateOptions& opt) {
  return run_guarded([&]() {
    if (opt.replications < 1)
      throw Error(errc::invalid_argument, "simulate: --reps must be >= 1");
    auto dir = ensure_out_dir(opt.common);

    SimSpec spec;
    spec.model = opt.model;
    spec.n = opt.n;
    spec.p = opt.p;
    spec.r = opt.common.r;
    spec.replications = opt.replications;
    spec.seed = opt.common.seed;

    // The CV grid scale comes from a pilot draw of the same design.
    SimData pilot = opt.model == SimModel::banded
                        ? gen_model1(opt.n, opt.p, Rng::derive_stream_seed(opt.common.seed, 0))
                        : gen_model2(opt.n, opt.p, Rng::derive_stream_seed(opt.common.seed, 0));
    CVConfig cv = make_cv_config(opt.common, sample_stats(pilot.y));

    MonteCarloReport report =
        run_monte_carlo(spec, opt.methods, opt.common.solver, cv, effective_threads(opt.common));

    std::ofstream reps(dir / "replications.csv");
    reps << "replication,method,failed,cc_loadings_mean,cc_loadings_min,cc_factors_mean,"
            "cc_factors_min,rmse_sigma_e,npd_sigma_e,npd_sigma_y,converged,lambda\n";
    for (const auto& rec : report.records) {
      reps << rec.replication << ',' << method_name(rec.method) << ',' << csv_bool(rec.failed)
           << ',' << format_double(rec.cc_loadings_mean) << ','
           << format_double(rec.cc_loadings_min) << ',' << format_double(rec.cc_factors_mean)
           << ',' << format_double(rec.cc_factors_min) << ',' << format_double(rec.rmse_sigma_e)
           << ',' << csv_bool(rec.sigma_e_npd) << ',' << csv_bool(rec.sigma_y_npd) << ','
           << csv_bool(rec.converged) << ',' << format_double(rec.lambda) << '\n';
    }
    reps.close();

    std::ofstream agg(dir / "aggregate.csv");
    agg << "method,completed,failed,cc_loadings,cc_factors,rmse_mean,rmse_variance,"
           "npd_sigma_e_pct,npd_sigma_y_pct\n";
    for (const auto& s : report.summaries) {
      agg << method_name(s.method) << ',' << s.completed << ',' << s.failed << ','
          << format_double(s.cc_loadings_mean) << ',' << format_double(s.cc_factors_mean) << ','
          << format_double(s.rmse_mean) << ',' << format_double(s.rmse_variance) << ','
          << format_double(s.npd_sigma_e_pct) << ',' << format_double(s.npd_sigma_y_pct) << '\n';
    }
    agg.close();

    json doc;
    doc["command"] = "simulate";
    doc["config"] = {{"model", sim_model_name(spec.model)}, {"n", spec.n},      {"p", spec.p},
                     {"r", spec.r},                         {"replications", spec.replications},
                     {"seed", spec.seed},                   {"k_folds", cv.k_folds},
                     {"lambda_grid", cv.lambda_grid},       {"solver", solver_json(opt.common.solver)}};
    doc["epc"] = "unavailable (comparator not implemented)";
    json methods = json::array();
    for (const auto& s : report.summaries) {
      methods.push_back({{"method", method_name(s.method)},
                         {"completed", s.completed},
                         {"failed", s.failed},
                         {"cc_loadings", s.cc_loadings_mean},
                         {"cc_factors", s.cc_factors_mean},
                         {"rmse_mean", s.rmse_mean},
                         {"rmse_variance", s.rmse_variance},
                         {"npd_sigma_e_pct", s.npd_sigma_e_pct},
                         {"npd_sigma_y_pct", s.npd_sigma_y_pct}});
    }
    doc["methods"] = methods;
    write_text(dir / "report.json", doc.dump(2) + "\n");

    for (const auto& s : report.summaries)
      std::cout << method_name(s.method) << ": " << s.seconds << " s\n";
    return 0;
  });
}

int cmd_estimate(const EstimateOptions& opt) {
  return run_guarded([&]() {
    auto dir = ensure_out_dir(opt.common);
    ObservationSet data = ObservationSet::from_matrix(read_csv_matrix(opt.input, opt.has_header));
    if (opt.common.r > std::min(data.n(), data.p()))
      throw Error(errc::invalid_argument, "estimate: --r exceeds min(n, p) of the input");
    SampleStats stats = sample_stats(data);

    double lambda = opt.common.lambda;
    json cv_json;
    if (lambda < 0.0) {
      CVConfig cv = make_cv_config(opt.common, stats);
      CVResult res = select_lambda(data, opt.common.r, PenaltySpec::lasso(data.p(), 0.0).weights,
                                   opt.common.solver, cv, effective_threads(opt.common));
      lambda = res.lambda_cv;
      cv_json = {{"lambda_cv", res.lambda_cv}, {"k_folds", cv.k_folds}};
    }

    FactorEstimate est;
    FitReport report;
    try {
      auto [fitted, rep] =
          fit(data, opt.common.r, PenaltySpec::lasso(data.p(), lambda), opt.common.solver);
      est = fitted;
      report = rep;
    } catch (const Error& e) {
      if (e.code() == errc::npd_covariance)
        throw Error(errc::npd_covariance,
                    std::string("estimate: fit lost positive definiteness: ") + e.what());
      throw;
    }

    write_csv_matrix((dir / "lambda_hat.csv").string(), est.lambda);
    write_csv_matrix((dir / "sigma_e_hat.csv").string(), est.sigma_e.dense());
    Eigen::MatrixXd scores = best_effort_scores(data, est);
    if (scores.size() > 0) write_csv_matrix((dir / "scores.csv").string(), scores);

    NpdFlags flags = npd_flags(est);
    json doc;
    doc["command"] = "estimate";
    doc["config"] = {{"input", opt.input},   {"r", opt.common.r},
                     {"lambda", lambda},     {"seed", opt.common.seed},
                     {"solver", solver_json(opt.common.solver)}};
    if (!cv_json.is_null()) doc["cv"] = cv_json;
    doc["result"] = {{"converged", report.converged},
                     {"iterations", report.iterations},
                     {"objective_trace", report.objective_trace},
                     {"min_eig_sigma_e", report.min_eig_sigma_e},
                     {"min_eig_sigma_y", report.min_eig_sigma_y},
                     {"npd_sigma_e", flags.sigma_e_npd},
                     {"npd_sigma_y", flags.sigma_y_npd},
                     {"stopped_on_npd", report.stopped_on_npd},
                     {"rotation_degenerate", report.rotation_degenerate},
                     {"scores_written", scores.size() > 0}};
    write_text(dir / "report.json", doc.dump(2) + "\n");
    return 0;
  });
}

int cmd_cv(const CvOptions& opt) {
  return run_guarded([&]() {
    auto dir = ensure_out_dir(opt.common);
    ObservationSet data = ObservationSet::from_matrix(read_csv_matrix(opt.input, opt.has_header));
    SampleStats stats = sample_stats(data);
    CVConfig cv = make_cv_config(opt.common, stats);
    CVResult res = select_lambda(data, opt.common.r, PenaltySpec::lasso(data.p(), 0.0).weights,
                                 opt.common.solver, cv, effective_threads(opt.common));

    std::ofstream table(dir / "cv_table.csv");
    table << "lambda,mean_loss,failed_folds\n";
    for (const auto& row : res.table)
      table << format_double(row.lambda) << ',' << format_double(row.mean_loss) << ','
            << row.failed_folds << '\n';
    table.close();

    json doc;
    doc["command"] = "cv";
    doc["config"] = {{"input", opt.input},       {"r", opt.common.r},
                     {"k_folds", cv.k_folds},    {"seed", opt.common.seed},
                     {"lambda_grid", cv.lambda_grid},
                     {"solver", solver_json(opt.common.solver)}};
    doc["lambda_cv"] = res.lambda_cv;
    write_text(dir / "report.json", doc.dump(2) + "\n");
    std::cout << "lambda_cv = " << format_double(res.lambda_cv) << "\n";
    return 0;
  });
}

int cmd_forecast(const ForecastOptions& opt) {
  return run_guarded([&]() {
    auto dir = ensure_out_dir(opt.common);

    Eigen::MatrixXd y;
    Eigen::VectorXd x;
    if (opt.synthetic) {
      ForecastSeries series = gen_forecast_data(opt.p, opt.n, opt.m, opt.common.seed);
      y = std::move(series.y);
      x = std::move(series.x);
    } else {
      if (opt.input_y.empty() || opt.input_x.empty())
        throw Error(errc::invalid_argument,
                    "forecast: provide --input-y and --input-x, or --synthetic");
      y = read_csv_matrix(opt.input_y, opt.has_header);
      Eigen::MatrixXd xm = read_csv_matrix(opt.input_x, opt.has_header);
      if (xm.cols() != 1)
        throw Error(errc::invalid_argument, "forecast: --input-x must have one column");
      x = xm.col(0);
    }

    ForecastSpec spec;
    spec.horizon = opt.horizon;
    spec.lags = opt.lags;
    spec.n_origins = static_cast<int>(opt.m);
    spec.window = opt.n;
    spec.r = opt.common.r;
    spec.per_origin_cv = opt.per_origin_cv;

    CVConfig cv;
    cv.k_folds = opt.common.k_folds;
    cv.seed = opt.common.seed;
    if (opt.common.lambda >= 0.0) {
      cv.lambda_grid = {opt.common.lambda};
    } else if (!opt.common.lambda_grid.empty()) {
      cv.lambda_grid = opt.common.lambda_grid;
    } else {
      Eigen::MatrixXd first = y.topRows(opt.n);
      cv.lambda_grid = default_lambda_grid(sample_stats(ObservationSet::from_matrix(first)));
    }

    std::vector<Method> methods = opt.methods;
    if (std::find(methods.begin(), methods.end(), Method::pc) == methods.end())
      methods.push_back(Method::pc);  // benchmark is always computed

    std::vector<ForecastResult> results(methods.size());
    for (std::size_t i = 0; i < methods.size(); ++i) {
      spec.method = methods[i];
      results[i] =
          rolling_forecast(y, x, spec, opt.common.solver, cv, effective_threads(opt.common));
    }
    double pc_mse = 0.0;
    for (std::size_t i = 0; i < methods.size(); ++i)
      if (methods[i] == Method::pc) pc_mse = results[i].mse;

    std::ofstream per_origin(dir / "forecasts.csv");
    per_origin << "method,origin,forecast,actual,sq_error\n";
    for (std::size_t i = 0; i < methods.size(); ++i)
      for (std::size_t t = 0; t < results[i].forecasts.size(); ++t)
        per_origin << method_name(methods[i]) << ',' << t << ','
                   << format_double(results[i].forecasts[t]) << ','
                   << format_double(results[i].actuals[t]) << ','
                   << format_double(results[i].sq_errors[t]) << '\n';
    per_origin.close();

    std::ofstream mse_table(dir / "mse.csv");
    mse_table << "method,mse,relative_to_pc,lambda\n";
    for (std::size_t i = 0; i < methods.size(); ++i)
      mse_table << method_name(methods[i]) << ',' << format_double(results[i].mse) << ','
                << format_double(relative_mse(results[i].mse, pc_mse)) << ','
                << format_double(results[i].lambda) << '\n';
    mse_table.close();

    json doc;
    doc["command"] = "forecast";
    doc["config"] = {{"synthetic", opt.synthetic},
                     {"p", opt.p},
                     {"window", opt.n},
                     {"origins", opt.m},
                     {"horizon", opt.horizon},
                     {"lags", opt.lags},
                     {"r", opt.common.r},
                     {"seed", opt.common.seed},
                     {"per_origin_cv", opt.per_origin_cv},
                     {"lambda_grid", cv.lambda_grid},
                     {"k_folds", cv.k_folds},
                     {"solver", solver_json(opt.common.solver)}};
    json per_method = json::array();
    for (std::size_t i = 0; i < methods.size(); ++i)
      per_method.push_back({{"method", method_name(methods[i])},
                            {"mse", results[i].mse},
                            {"relative_to_pc", relative_mse(results[i].mse, pc_mse)},
                            {"lambda", results[i].lambda}});
    doc["methods"] = per_method;
    write_text(dir / "report.json", doc.dump(2) + "\n");
    return 0;
  });
}

}  // namespace facov::cli
