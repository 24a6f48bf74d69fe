#include <CLI11.hpp>

#include "cli_commands.hpp"

namespace {

using facov::cli::CommonOptions;

void add_common_flags(CLI::App* cmd, CommonOptions& common, std::string* mode) {
  cmd->set_help_flag("--help", "Print help and exit");
  cmd->add_option("--seed", common.seed, "RNG seed");
  cmd->add_option("--threads", common.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out-dir", common.out_dir, "output directory");
  cmd->add_option("--r", common.r, "number of factors")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda", common.lambda, "fixed penalty level (skips CV)");
  cmd->add_option("--lambda-grid", common.lambda_grid, "CV grid of penalty levels");
  cmd->add_option("--k-folds", common.k_folds, "CV folds")->check(CLI::Range(2, 100));
  cmd->add_option("--delta", common.solver.delta, "PD floor on Sigma_e");
  cmd->add_option("--mode", *mode, "constrained|unconstrained|diagonal")
      ->check(CLI::IsMember({"constrained", "unconstrained", "diagonal"}));
  cmd->add_option("--em-max-iter", common.solver.em_max_iter, "EM sweep cap");
  cmd->add_option("--em-tol", common.solver.em_tol, "EM relative objective tolerance");
  cmd->add_option("--apg-max-iter", common.solver.apg_max_iter, "inner solver iteration cap");
  cmd->add_option("--apg-tol", common.solver.apg_tol, "inner solver iterate tolerance");
  cmd->add_option("--t-init", common.solver.t_init, "initial MM step size");
}

void apply_mode(CommonOptions& common, const std::string& mode) {
  if (mode == "unconstrained")
    common.solver.mode = facov::SolverMode::unconstrained;
  else if (mode == "diagonal")
    common.solver.mode = facov::SolverMode::diagonal;
  else
    common.solver.mode = facov::SolverMode::constrained;
}

std::vector<facov::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<facov::Method> out;
  for (const auto& name : names) out.push_back(facov::cli::parse_method(name));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized maximum-likelihood estimation of approximate factor models"};
  app.set_help_flag("--help", "Print help and exit");
  app.require_subcommand(1);
  // Subcommands may use short flags like --h, so keep help on --help only.
  app.option_defaults()->ignore_case(false);

  facov::cli::SimulateOptions sim;
  facov::cli::EstimateOptions est;
  facov::cli::CvOptions cv;
  facov::cli::ForecastOptions fc;
  std::string sim_mode = "constrained", est_mode = "constrained", cv_mode = "constrained",
              fc_mode = "constrained";
  std::string sim_model = "banded";
  std::vector<std::string> sim_methods, fc_methods;

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo benchmark of the estimators");
  add_common_flags(simulate, sim.common, &sim_mode);
  simulate->add_option("--model", sim_model, "banded|approx_sparse")
      ->check(CLI::IsMember({"banded", "approx_sparse"}));
  simulate->add_option("--n", sim.n, "observations per replication")->check(CLI::PositiveNumber);
  simulate->add_option("--p", sim.p, "variables")->check(CLI::PositiveNumber);
  simulate->add_option("--reps", sim.replications, "replications")->check(CLI::PositiveNumber);
  simulate->add_option("--methods", sim_methods, "subset of emapg,mmem,hml,pc");

  CLI::App* estimate = app.add_subcommand("estimate", "Fit the factor model to a CSV panel");
  add_common_flags(estimate, est.common, &est_mode);
  estimate->add_option("--input", est.input, "CSV with observation rows")->required();
  estimate->add_flag("--header", est.has_header, "input has a header row");

  CLI::App* cv_cmd = app.add_subcommand("cv", "Cross-validate the penalty level");
  add_common_flags(cv_cmd, cv.common, &cv_mode);
  cv_cmd->add_option("--input", cv.input, "CSV with observation rows")->required();
  cv_cmd->add_flag("--header", cv.has_header, "input has a header row");

  CLI::App* forecast = app.add_subcommand("forecast", "Rolling diffusion-index forecasting");
  add_common_flags(forecast, fc.common, &fc_mode);
  forecast->add_flag("--synthetic", fc.synthetic, "generate the synthetic two-factor design");
  forecast->add_option("--p", fc.p, "variables (synthetic)")->check(CLI::PositiveNumber);
  forecast->add_option("--n", fc.n, "training window length")->check(CLI::PositiveNumber);
  forecast->add_option("--m", fc.m, "number of rolling origins")->check(CLI::PositiveNumber);
  forecast->add_option("--h", fc.horizon, "forecast horizon")->check(CLI::PositiveNumber);
  forecast->add_option("--lags", fc.lags, "lags of the target series")
      ->check(CLI::NonNegativeNumber);
  forecast->add_flag("--per-origin-cv", fc.per_origin_cv, "re-select lambda at every origin");
  forecast->add_option("--input-y", fc.input_y, "CSV panel (rows = periods)");
  forecast->add_option("--input-x", fc.input_x, "CSV target series (one column)");
  forecast->add_flag("--header", fc.has_header, "inputs have a header row");
  forecast->add_option("--methods", fc_methods, "subset of emapg,mmem,hml,pc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      apply_mode(sim.common, sim_mode);
      sim.model = sim_model == "banded" ? facov::SimModel::banded : facov::SimModel::approx_sparse;
      if (!sim_methods.empty()) sim.methods = parse_methods(sim_methods);
      return facov::cli::cmd_simulate(sim);
    }
    if (estimate->parsed()) {
      apply_mode(est.common, est_mode);
      return facov::cli::cmd_estimate(est);
    }
    if (cv_cmd->parsed()) {
      apply_mode(cv.common, cv_mode);
      return facov::cli::cmd_cv(cv);
    }
    apply_mode(fc.common, fc_mode);
    if (!fc_methods.empty()) fc.methods = parse_methods(fc_methods);
    return facov::cli::cmd_forecast(fc);
  } catch (const facov::Error& e) {
    std::cerr << "error (" << facov::errc_name(e.code()) << "): " << e.what() << "\n";
    return e.code() == facov::errc::invalid_argument ? 2 : 1;
  }
}
