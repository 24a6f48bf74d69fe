#include "facov/simlab.hpp"

#include <chrono>
#include <cmath>

#include "facov/baselines.hpp"
#include "facov/parallel.hpp"
#include "facov/rng.hpp"

namespace facov {

namespace {

Eigen::MatrixXd draw_loadings(Rng& rng, Eigen::Index p, Eigen::Index r) {
  Eigen::MatrixXd lambda(p, r);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < r; ++j) lambda(i, j) = rng.uniform();
  return lambda;
}

Eigen::MatrixXd draw_factors(Rng& rng, Eigen::Index n, Eigen::Index r) {
  Eigen::MatrixXd f(n, r);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < r; ++j) f(i, j) = rng.normal();
  return f;
}

double mean_of(const Eigen::VectorXd& v) { return v.mean(); }

}  // namespace

const char* sim_model_name(SimModel m) {
  return m == SimModel::banded ? "banded" : "approx_sparse";
}

const char* method_name(Method m) {
  switch (m) {
    case Method::emapg: return "emapg";
    case Method::mmem: return "mmem";
    case Method::hml: return "hml";
    case Method::pc: return "pc";
  }
  return "unknown";
}

SolverMode method_mode(Method m) {
  switch (m) {
    case Method::emapg: return SolverMode::constrained;
    case Method::mmem: return SolverMode::unconstrained;
    case Method::hml: return SolverMode::diagonal;
    case Method::pc: break;
  }
  return SolverMode::diagonal;
}

SimData gen_model1(Eigen::Index n, Eigen::Index p, std::uint64_t seed, Eigen::Index r) {
  if (p < 4) throw Error(errc::invalid_argument, "gen_model1: need p >= 4");
  Rng rng(seed);

  // Mixing matrix T (lower banded, unit diagonal):
  //   e_1 = alpha_1, e_2 = alpha_2 + a_1 alpha_1,
  //   e_3 = alpha_3 + a_2 alpha_2 + b_1 alpha_1,
  //   e_k = alpha_k + a_{k-1} alpha_{k-1} + b_{k-2} alpha_{k-2} + c_{k-3} alpha_{k-3}.
  Eigen::VectorXd a(p - 1), b(p - 2), c(p - 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = 0.7 * rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.7 * rng.normal();
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = 0.7 * rng.normal();
  Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index k = 1; k < p; ++k) mix(k, k - 1) = a[k - 1];
  for (Eigen::Index k = 2; k < p; ++k) mix(k, k - 2) = b[k - 2];
  for (Eigen::Index k = 3; k < p; ++k) mix(k, k - 3) = c[k - 3];

  SimData out;
  out.sigma_e = SymMatrix::from_dense(mix * mix.transpose());
  out.lambda = draw_loadings(rng, p, r);
  out.factors = draw_factors(rng, n, r);

  Eigen::MatrixXd y(n, p);
  Eigen::VectorXd alpha(p);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) alpha[i] = rng.normal();
    y.row(j) = (out.lambda * out.factors.row(j).transpose() + mix * alpha).transpose();
  }
  out.y = ObservationSet::from_matrix(std::move(y));
  return out;
}

SimData gen_model2(Eigen::Index n, Eigen::Index p, std::uint64_t seed, Eigen::Index r) {
  if (p < 2) throw Error(errc::invalid_argument, "gen_model2: need p >= 2");
  Rng rng(seed);

  Eigen::MatrixXd m(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = std::pow(0.5, std::abs(double(i - j)));
  EigenPair ep = eigen_sym(SymMatrix::from_dense(m));
  const double mu_max = ep.values[0];
  const double mu_min = ep.values[p - 1];
  // cond(alpha I + M) = p  <=>  alpha = (mu_max - p mu_min) / (p - 1).
  const double alpha = (mu_max - static_cast<double>(p) * mu_min) / (static_cast<double>(p) - 1.0);
  if (alpha <= -mu_min)
    throw Error(errc::not_positive_definite, "gen_model2: alpha would break positive definiteness");
  Eigen::MatrixXd sigma = m;
  sigma.diagonal().array() += alpha;

  SimData out;
  out.sigma_e = SymMatrix::from_dense(sigma);
  out.lambda = draw_loadings(rng, p, r);
  out.factors = draw_factors(rng, n, r);

  Eigen::MatrixXd chol = cholesky_pd(sigma);
  Eigen::MatrixXd y(n, p);
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) z[i] = rng.normal();
    y.row(j) = (out.lambda * out.factors.row(j).transpose() + chol * z).transpose();
  }
  out.y = ObservationSet::from_matrix(std::move(y));
  return out;
}

Eigen::VectorXd canonical_correlations(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(errc::dimension_mismatch, "canonical_correlations: shape mismatch");
  const auto rank_tol = [](const Eigen::JacobiSVD<Eigen::MatrixXd>& svd) {
    return svd.singularValues()[svd.singularValues().size() - 1] >
           1e-12 * std::max(1.0, svd.singularValues()[0]);
  };
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_a(a, Eigen::ComputeThinU);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_b(b, Eigen::ComputeThinU);
  if (!rank_tol(svd_a) || !rank_tol(svd_b))
    throw Error(errc::rank_deficient, "canonical_correlations: argument not of full column rank");
  Eigen::MatrixXd cross = svd_a.matrixU().transpose() * svd_b.matrixU();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_c(cross);
  return svd_c.singularValues().cwiseMin(1.0).cwiseMax(0.0);
}

double rmse(const SymMatrix& sigma_hat, const SymMatrix& sigma_true) {
  if (sigma_hat.dim() != sigma_true.dim())
    throw Error(errc::dimension_mismatch, "rmse: dimension mismatch");
  return (sigma_hat.dense() - sigma_true.dense()).norm() / static_cast<double>(sigma_hat.dim());
}

NpdFlags npd_flags(const FactorEstimate& est) {
  NpdFlags flags;
  flags.sigma_e_npd = min_eigenvalue(est.sigma_e) <= 0.0;
  flags.sigma_y_npd = min_eigenvalue(est.implied_sigma_y()) <= 0.0;
  return flags;
}

Eigen::MatrixXd best_effort_scores(const ObservationSet& data, const FactorEstimate& est) {
  try {
    return factor_scores(data, est);
  } catch (const Error& e) {
    if (e.code() != errc::npd_covariance) throw;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(est.implied_sigma_y().dense());
  if (!lu.isInvertible()) return {};
  Eigen::MatrixXd gamma = lu.inverse() * est.lambda;
  Eigen::VectorXd ybar = data.rows.colwise().mean();
  Eigen::MatrixXd centered = data.rows.rowwise() - ybar.transpose();
  return centered * gamma;
}

std::vector<MethodSummary> aggregate_records(const std::vector<ReplicationRecord>& records,
                                             const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method method : methods) {
    MethodSummary s;
    s.method = method;
    std::vector<double> rmses;
    int npd_e = 0, npd_y = 0;
    for (const auto& rec : records) {
      if (rec.method != method) continue;
      if (rec.failed) {
        ++s.failed;
        continue;
      }
      ++s.completed;
      s.cc_loadings_mean += rec.cc_loadings_mean;
      s.cc_factors_mean += rec.cc_factors_mean;
      rmses.push_back(rec.rmse_sigma_e);
      npd_e += rec.sigma_e_npd ? 1 : 0;
      npd_y += rec.sigma_y_npd ? 1 : 0;
    }
    if (s.completed > 0) {
      s.cc_loadings_mean /= s.completed;
      s.cc_factors_mean /= s.completed;
      double mean = 0.0;
      for (double v : rmses) mean += v;
      mean /= rmses.size();
      s.rmse_mean = mean;
      double var = 0.0;
      for (double v : rmses) var += (v - mean) * (v - mean);
      s.rmse_variance = rmses.size() > 1 ? var / (rmses.size() - 1.0) : 0.0;
      s.npd_sigma_e_pct = 100.0 * npd_e / s.completed;
      s.npd_sigma_y_pct = 100.0 * npd_y / s.completed;
    }
    out.push_back(s);
  }
  return out;
}

MonteCarloReport run_monte_carlo(const SimSpec& spec, const std::vector<Method>& methods,
                                 const SolverConfig& cfg, const CVConfig& cv, int threads) {
  if (spec.replications < 1)
    throw Error(errc::invalid_argument, "run_monte_carlo: need replications >= 1");
  if (methods.empty())
    throw Error(errc::invalid_argument, "run_monte_carlo: no methods requested");

  MonteCarloReport report;
  report.spec = spec;
  report.records.resize(static_cast<std::size_t>(spec.replications) * methods.size());
  std::vector<double> method_seconds(methods.size(), 0.0);
  std::mutex timing_mutex;

  // With select_once, penalized methods cross-validate on replication 0's
  // data and reuse that lambda everywhere.
  std::vector<double> fixed_lambda(methods.size(), -1.0);
  if (cv.select_once && cv.lambda_grid.size() > 1) {
    const std::uint64_t seed0 = Rng::derive_stream_seed(spec.seed, 0);
    SimData pilot = spec.model == SimModel::banded ? gen_model1(spec.n, spec.p, seed0, spec.r)
                                                   : gen_model2(spec.n, spec.p, seed0, spec.r);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      if (methods[mi] != Method::emapg && methods[mi] != Method::mmem) continue;
      SolverConfig mode_cfg = cfg;
      mode_cfg.mode = method_mode(methods[mi]);
      CVConfig once = cv;
      once.seed = Rng::derive_stream_seed(cv.seed, mi);
      try {
        fixed_lambda[mi] = select_lambda(pilot.y, spec.r,
                                         PenaltySpec::lasso(spec.p, 0.0).weights, mode_cfg, once,
                                         threads)
                               .lambda_cv;
      } catch (const Error&) {
        fixed_lambda[mi] = once.lambda_grid[once.lambda_grid.size() / 2];
      }
    }
  }

  parallel_for(static_cast<std::size_t>(spec.replications), threads, [&](std::size_t rep) {
    const std::uint64_t data_seed = Rng::derive_stream_seed(spec.seed, rep);
    SimData sim = spec.model == SimModel::banded
                      ? gen_model1(spec.n, spec.p, data_seed, spec.r)
                      : gen_model2(spec.n, spec.p, data_seed, spec.r);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Method method = methods[mi];
      ReplicationRecord rec;
      rec.replication = static_cast<int>(rep);
      rec.method = method;
      const auto started = std::chrono::steady_clock::now();
      try {
        FactorEstimate est;
        Eigen::MatrixXd scores;
        if (method == Method::pc) {
          PcResult pc = pc_estimate(sim.y, spec.r);
          est = pc.est;
          scores = pc.scores;
        } else if (method == Method::hml) {
          auto [fitted, rep_info] = hml_estimate(sim.y, spec.r, cfg);
          est = fitted;
          rec.converged = rep_info.converged;
          scores = factor_scores(sim.y, est);
        } else {
          SolverConfig mode_cfg = cfg;
          mode_cfg.mode = method_mode(method);
          CVConfig rep_cv = cv;
          rep_cv.seed = Rng::derive_stream_seed(cv.seed, rep * 4 + mi);
          double lambda = rep_cv.lambda_grid.empty() ? 0.0 : rep_cv.lambda_grid[0];
          if (fixed_lambda[mi] >= 0.0) {
            lambda = fixed_lambda[mi];
          } else if (rep_cv.lambda_grid.size() > 1) {
            try {
              lambda = select_lambda(sim.y, spec.r, PenaltySpec::lasso(spec.p, 0.0).weights,
                                     mode_cfg, rep_cv)
                           .lambda_cv;
            } catch (const Error&) {
              // Every lambda broke down in CV (the unconstrained stand-in
              // does this in p > n designs); score the mid-grid choice.
              lambda = rep_cv.lambda_grid[rep_cv.lambda_grid.size() / 2];
            }
          }
          rec.lambda = lambda;
          auto [fitted, rep_info] = fit(sim.y, spec.r, PenaltySpec::lasso(spec.p, lambda), mode_cfg);
          est = fitted;
          rec.converged = rep_info.converged;
          scores = best_effort_scores(sim.y, est);
        }

        Eigen::VectorXd cc_load = canonical_correlations(est.lambda, sim.lambda);
        rec.cc_loadings_mean = mean_of(cc_load);
        rec.cc_loadings_min = cc_load[cc_load.size() - 1];
        if (scores.size() > 0) {
          Eigen::VectorXd cc_fac = canonical_correlations(scores, sim.factors);
          rec.cc_factors_mean = mean_of(cc_fac);
          rec.cc_factors_min = cc_fac[cc_fac.size() - 1];
        }
        rec.rmse_sigma_e = rmse(est.sigma_e, sim.sigma_e);
        NpdFlags flags = npd_flags(est);
        rec.sigma_e_npd = flags.sigma_e_npd;
        rec.sigma_y_npd = flags.sigma_y_npd;
      } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
      const auto ended = std::chrono::steady_clock::now();
      {
        std::lock_guard<std::mutex> lock(timing_mutex);
        method_seconds[mi] += std::chrono::duration<double>(ended - started).count();
      }
      report.records[rep * methods.size() + mi] = std::move(rec);
    }
  });

  report.summaries = aggregate_records(report.records, methods);
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    report.summaries[mi].seconds = method_seconds[mi];
  return report;
}

}  // namespace facov
