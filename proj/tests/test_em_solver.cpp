#include <doctest.h>

#include <cmath>

#include "facov/baselines.hpp"
#include "facov/em_solver.hpp"
#include "facov/simlab.hpp"
#include "testkit.hpp"

using namespace facov;
using namespace facov::testkit;

TEST_SUITE_BEGIN("em_solver");

TEST_CASE("e_step closed forms") {
  // Lambda = 0 gives Gamma = 0, Omega = I
  FactorEstimate zero;
  zero.lambda = Eigen::MatrixXd::Zero(3, 2);
  zero.sigma_e = SymMatrix::identity(3);
  EStepQuantities eq0 = e_step(zero);
  CHECK(eq0.gamma.norm() == 0.0);
  CHECK(max_abs_diff(eq0.omega.dense(), Eigen::MatrixXd::Identity(2, 2)) < 1e-14);

  // scalar case: Sigma_y = 2, Gamma = 0.5, Omega = 0.5
  FactorEstimate scalar;
  scalar.lambda = Eigen::MatrixXd::Constant(1, 1, 1.0);
  scalar.sigma_e = SymMatrix::identity(1);
  EStepQuantities eq1 = e_step(scalar);
  CHECK(eq1.gamma(0, 0) == doctest::Approx(0.5));
  CHECK(eq1.omega(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("e_step against a dense-inverse oracle") {
  Rng rng(51);
  FactorEstimate est;
  est.lambda = random_matrix(rng, 5, 2);
  est.sigma_e = random_pd(rng, 5);
  EStepQuantities eq = e_step(est);
  Eigen::MatrixXd sy_inv = (est.lambda * est.lambda.transpose() + est.sigma_e.dense()).inverse();
  CHECK(max_abs_diff(eq.gamma, sy_inv * est.lambda) < 1e-8);
  Eigen::MatrixXd omega_direct =
      Eigen::MatrixXd::Identity(2, 2) - est.lambda.transpose() * sy_inv * est.lambda;
  CHECK(max_abs_diff(eq.omega.dense(), omega_direct) < 1e-8);
  CHECK(min_eigenvalue(eq.omega) > -1e-8);  // conditional covariance
}

TEST_CASE("e_step requires a PD Sigma_y") {
  FactorEstimate bad;
  bad.lambda = Eigen::MatrixXd::Zero(2, 1);
  bad.sigma_e = SymMatrix::from_diagonal(Eigen::Vector2d{1.0, -0.5});
  try {
    e_step(bad);
    FAIL("expected npd_covariance");
  } catch (const Error& e) {
    CHECK(e.code() == errc::npd_covariance);
  }
}

TEST_CASE("expected_moments closed forms") {
  Rng rng(52);
  SampleStats stats{Eigen::VectorXd::Zero(4), SymMatrix::identity(4)};
  EStepQuantities eq;
  eq.gamma = random_matrix(rng, 4, 2);
  eq.omega = random_pd(rng, 2, 0.2);

  auto [fft, yft] = expected_moments(stats, eq);
  CHECK(max_abs_diff(fft.dense(), eq.gamma.transpose() * eq.gamma + eq.omega.dense()) < 1e-12);
  CHECK(max_abs_diff(yft, eq.gamma) < 1e-12);

  EStepQuantities null_eq;
  null_eq.gamma = Eigen::MatrixXd::Zero(4, 2);
  null_eq.omega = eq.omega;
  auto [fft0, yft0] = expected_moments(stats, null_eq);
  CHECK(max_abs_diff(fft0.dense(), eq.omega.dense()) < 1e-14);
  CHECK(yft0.norm() == 0.0);
}

TEST_CASE("expected_moments match conditional Monte Carlo") {
  // Appendix-style oracle: draw factors from N(Gamma'(y - ybar), Omega) and
  // average the sufficient statistics over 1e5 draws.
  Rng rng(53);
  const Eigen::Index p = 4, r = 2, n = 100;
  FactorEstimate est;
  est.lambda = random_matrix(rng, p, r);
  est.sigma_e = random_pd(rng, p);
  Eigen::MatrixXd data_raw = random_matrix(rng, n, p) * cholesky_pd(est.implied_sigma_y().dense()).transpose();
  ObservationSet data = ObservationSet::from_matrix(data_raw);
  SampleStats stats = sample_stats(data);
  EStepQuantities eq = e_step(est);
  auto [fft, yft] = expected_moments(stats, eq);

  Eigen::MatrixXd chol_omega = cholesky_pd(eq.omega.dense());
  Eigen::MatrixXd sum_ff = Eigen::MatrixXd::Zero(r, r);
  Eigen::MatrixXd sum_yf = Eigen::MatrixXd::Zero(p, r);
  const int reps = 1000;  // 1000 sweeps x 100 observations = 1e5 draws
  Eigen::VectorXd z(r);
  for (int repeat = 0; repeat < reps; ++repeat) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd centered = data.rows.row(i).transpose() - stats.ybar;
      for (Eigen::Index k = 0; k < r; ++k) z[k] = rng.normal();
      Eigen::VectorXd f = eq.gamma.transpose() * centered + chol_omega * z;
      sum_ff.noalias() += f * f.transpose();
      sum_yf.noalias() += centered * f.transpose();
    }
  }
  const double total = static_cast<double>(reps) * static_cast<double>(n);
  const double scale_ff = std::max(1.0, fft.dense().cwiseAbs().maxCoeff());
  const double scale_yf = std::max(1.0, yft.cwiseAbs().maxCoeff());
  CHECK(max_abs_diff(sum_ff / total, fft.dense()) < 0.02 * scale_ff);
  CHECK(max_abs_diff(sum_yf / total, yft) < 0.02 * scale_yf);
}

TEST_CASE("update_lambda closed forms") {
  SampleStats stats{Eigen::VectorXd::Zero(3), SymMatrix::identity(3)};
  EStepQuantities eq;
  eq.gamma = Eigen::MatrixXd::Zero(3, 2);
  eq.omega = SymMatrix::identity(2);
  CHECK(update_lambda(stats, eq).norm() == 0.0);

  // scalar: S = 2, Gamma = 0.5, Omega = 0.5 -> Lambda_new = 1
  SampleStats s1{Eigen::VectorXd::Zero(1), SymMatrix::from_diagonal(Eigen::VectorXd::Constant(1, 2.0))};
  EStepQuantities eq1;
  eq1.gamma = Eigen::MatrixXd::Constant(1, 1, 0.5);
  eq1.omega = SymMatrix::from_diagonal(Eigen::VectorXd::Constant(1, 0.5));
  CHECK(update_lambda(s1, eq1)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("EM is stationary at the exact model") {
  // With S_y = Lambda Lambda' + Sigma_e exactly and lambda = 0, one sweep
  // must not move the estimate.
  Rng rng(54);
  const Eigen::Index p = 5, r = 2;
  Eigen::MatrixXd lambda = random_matrix(rng, p, r);
  SymMatrix sigma_e = random_pd(rng, p);
  SymMatrix sy = SymMatrix::from_dense(lambda * lambda.transpose() + sigma_e.dense());
  SampleStats stats{Eigen::VectorXd::Zero(p), sy};

  FactorEstimate est{lambda, sigma_e};
  EStepQuantities eq = e_step(est);
  Eigen::MatrixXd lambda_new = update_lambda(stats, eq);
  CHECK((lambda_new - lambda).norm() < 1e-6);

  EStepQuantities eq_mid = e_step(FactorEstimate{lambda_new, sigma_e});
  SymMatrix m = build_M(stats, lambda_new, eq_mid);
  CHECK((m.dense() - sigma_e.dense()).norm() < 1e-6);

  SolverConfig cfg;
  SymMatrix sigma_new = covariance_update(sigma_e, m, PenaltySpec::lasso(p, 0.0), cfg);
  CHECK((sigma_new.dense() - sigma_e.dense()).norm() < 1e-6);
}

TEST_CASE("one EM sweep from the exact model moves nothing") {
  Rng rng(60);
  const Eigen::Index p = 6, r = 2;
  FactorEstimate truth;
  truth.lambda = random_matrix(rng, p, r);
  truth.sigma_e = random_pd(rng, p);
  SymMatrix sy = truth.implied_sigma_y();
  ObservationSet data = dataset_with_exact_stats(sy);
  SolverConfig cfg;
  cfg.em_max_iter = 1;
  auto [est, report] = fit(data, r, PenaltySpec::lasso(p, 0.0), cfg, truth);
  // identification may rotate the loadings, but Lambda Lambda' and Sigma_e
  // must be unchanged by the sweep
  CHECK((est.lambda * est.lambda.transpose() - truth.lambda * truth.lambda.transpose()).norm() <
        1e-6);
  CHECK((est.sigma_e.dense() - truth.sigma_e.dense()).norm() < 1e-6);
}

TEST_CASE("build_M closed forms and positive definiteness") {
  Rng rng(55);
  SampleStats stats{Eigen::VectorXd::Zero(6), random_pd(rng, 6)};
  EStepQuantities eq;
  eq.gamma = Eigen::MatrixXd::Zero(6, 2);
  eq.omega = SymMatrix::identity(2);

  // Lambda_new = 0 -> M = S_y
  CHECK(max_abs_diff(build_M(stats, Eigen::MatrixXd::Zero(6, 2), eq).dense(), stats.s_y.dense()) <
        1e-14);

  // Gamma = 0, Omega = I -> M = S_y + Lambda Lambda'
  Eigen::MatrixXd lam = random_matrix(rng, 6, 2);
  CHECK(max_abs_diff(build_M(stats, lam, eq).dense(),
                     stats.s_y.dense() + lam * lam.transpose()) < 1e-12);

  // PD whenever S_y is PD
  FactorEstimate est;
  est.lambda = lam;
  est.sigma_e = random_pd(rng, 6);
  EStepQuantities full = e_step(est);
  CHECK(min_eigenvalue(build_M(stats, lam, full)) > 0.0);
}

TEST_CASE("fit contract on the trace length and monotonicity") {
  auto sim = gen_model2(30, 8, 99);
  SolverConfig cfg;
  cfg.em_max_iter = 1;
  auto [est, report] = fit(sim.y, 2, PenaltySpec::lasso(8, 0.05), cfg);
  CHECK(report.objective_trace.size() == 2);
  CHECK(report.objective_trace[1] <= report.objective_trace[0] + 1e-8);
  CHECK(report.iterations == 1);
}

TEST_CASE("fit stays monotone and keeps Sigma_e above the floor") {
  SolverConfig cfg;
  cfg.em_max_iter = 40;
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    auto sim = gen_model1(25, 10, seed);
    auto [est, report] = fit(sim.y, 2, PenaltySpec::lasso(10, 0.1), cfg);
    for (std::size_t k = 1; k < report.objective_trace.size(); ++k)
      CHECK(report.objective_trace[k] <= report.objective_trace[k - 1] + 1e-8);
    CHECK(report.min_eig_sigma_e >= cfg.delta - 1e-8);
    Eigen::MatrixXd lower;
    Eigen::MatrixXd shifted = est.sigma_e.dense();
    shifted.diagonal().array() -= cfg.delta - 1e-8;
    CHECK(try_cholesky(shifted, lower));
  }
}

TEST_CASE("diagonal-mode fit recovers a symmetric strict one-factor model") {
  // p = 2, r = 1 with equal loadings and equal uniquenesses: the classical
  // solution is pinned by symmetry, lambda_i = sqrt(s_12).
  SymMatrix sy(2);
  sy.set(0, 0, 0.8 * 0.8 + 0.3);
  sy.set(1, 1, 0.8 * 0.8 + 0.3);
  sy.set(1, 0, 0.8 * 0.8);
  ObservationSet data = dataset_with_exact_stats(sy);
  SolverConfig cfg;
  cfg.mode = SolverMode::diagonal;
  cfg.em_max_iter = 3000;
  cfg.em_tol = 1e-13;
  auto [est, report] = fit(data, 1, PenaltySpec::lasso(2, 0.0), cfg);
  CHECK(std::abs(std::abs(est.lambda(0, 0)) - 0.8) < 1e-4);
  CHECK(std::abs(std::abs(est.lambda(1, 0)) - 0.8) < 1e-4);
  CHECK(est.sigma_e(0, 0) == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("identify_rotation invariants") {
  Rng rng(56);
  FactorEstimate est;
  est.lambda = random_matrix(rng, 6, 3);
  est.sigma_e = random_pd(rng, 6);

  bool degenerate = false;
  FactorEstimate rotated = identify_rotation(est, &degenerate);

  // Lambda Lambda' unchanged
  CHECK(max_abs_diff(rotated.lambda * rotated.lambda.transpose(),
                     est.lambda * est.lambda.transpose()) < 1e-10);

  // Lambda' Sigma_e^{-1} Lambda diagonal with descending entries
  Eigen::MatrixXd q = rotated.lambda.transpose() * est.sigma_e.dense().inverse() * rotated.lambda;
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (i != j) CHECK(std::abs(q(i, j)) < 1e-8);
  CHECK(q(0, 0) >= q(1, 1));
  CHECK(q(1, 1) >= q(2, 2));

  // sign convention: largest-magnitude entry of each column positive
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::Index imax = 0;
    rotated.lambda.col(j).cwiseAbs().maxCoeff(&imax);
    CHECK(rotated.lambda(imax, j) > 0.0);
  }

  // applying it twice changes nothing further
  FactorEstimate again = identify_rotation(rotated);
  CHECK(max_abs_diff(again.lambda, rotated.lambda) < 1e-9);
}

TEST_CASE("identify_rotation is invariant to arbitrary rotations of the input") {
  Rng rng(57);
  FactorEstimate est;
  est.lambda = random_matrix(rng, 5, 2);
  est.sigma_e = random_pd(rng, 5);
  FactorEstimate reference = identify_rotation(est);
  for (int trial = 0; trial < 10; ++trial) {
    FactorEstimate mixed = est;
    mixed.lambda = est.lambda * random_orthogonal(rng, 2);
    FactorEstimate back = identify_rotation(mixed);
    CHECK(max_abs_diff(back.lambda, reference.lambda) < 1e-8);
  }
}

TEST_CASE("identify_rotation flags repeated eigenvalues and still succeeds") {
  // orthogonal equal-norm columns with Sigma_e = I make
  // Lambda' Sigma_e^{-1} Lambda a multiple of the identity
  FactorEstimate est;
  est.lambda = Eigen::MatrixXd::Zero(4, 2);
  est.lambda(0, 0) = 2.0;
  est.lambda(1, 1) = 2.0;
  est.sigma_e = SymMatrix::identity(4);
  bool degenerate = false;
  FactorEstimate out = identify_rotation(est, &degenerate);
  CHECK(degenerate);
  CHECK(max_abs_diff(out.lambda * out.lambda.transpose(),
                     est.lambda * est.lambda.transpose()) < 1e-10);
}

TEST_CASE("identify_rotation with r = 1 only fixes the sign") {
  Rng rng(58);
  FactorEstimate est;
  est.lambda = -random_matrix(rng, 4, 1).cwiseAbs();  // make the sign flip necessary
  est.sigma_e = random_pd(rng, 4);
  FactorEstimate out = identify_rotation(est);
  CHECK(max_abs_diff(out.lambda, -est.lambda) < 1e-12);
}

TEST_CASE("factor_scores closed forms") {
  // all rows equal the mean -> zero scores
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 2, 1.5);
  constant.row(0) << 1.5, 1.5;
  FactorEstimate est;
  est.lambda = Eigen::MatrixXd::Constant(2, 1, 1.0);
  est.sigma_e = SymMatrix::identity(2);
  CHECK(factor_scores(ObservationSet::from_matrix(constant), est).norm() == 0.0);

  // scalar case: Gamma = 0.5, y - ybar = +-2 -> scores +-1
  Eigen::MatrixXd data(2, 1);
  data << 2.0, -2.0;  // mean zero
  FactorEstimate s1;
  s1.lambda = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s1.sigma_e = SymMatrix::identity(1);
  Eigen::MatrixXd scores = factor_scores(ObservationSet::from_matrix(data), s1);
  CHECK(scores(0, 0) == doctest::Approx(1.0));
  CHECK(scores(1, 0) == doctest::Approx(-1.0));
}

TEST_CASE("factor_scores recover the factors in the noiseless limit") {
  Rng rng(59);
  const Eigen::Index p = 6, r = 2, n = 40;
  Eigen::MatrixXd lambda = random_matrix(rng, p, r);
  Eigen::MatrixXd f = random_matrix(rng, n, r);
  f.rowwise() -= f.colwise().mean();  // keep ybar = 0 so scores use exact factors
  Eigen::MatrixXd data = f * lambda.transpose();
  FactorEstimate est;
  est.lambda = lambda;
  est.sigma_e = SymMatrix::from_dense(1e-6 * Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd scores = factor_scores(ObservationSet::from_matrix(data), est);
  CHECK(max_abs_diff(scores, f) < 1e-3);
}

TEST_SUITE_END();
