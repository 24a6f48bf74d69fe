#include <doctest.h>

#include "facov/numkit.hpp"
#include "testkit.hpp"

using namespace facov;
using namespace facov::testkit;

TEST_SUITE_BEGIN("numkit");

TEST_CASE("SymMatrix storage is exactly symmetric") {
  Rng rng(1);
  Eigen::MatrixXd a = random_matrix(rng, 6, 6);  // deliberately asymmetric
  SymMatrix s = SymMatrix::from_dense(a);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      CHECK(s(i, j) == s(j, i));
      CHECK(s(i, j) == doctest::Approx(0.5 * (a(i, j) + a(j, i))).epsilon(1e-15));
    }
  CHECK_THROWS_AS(SymMatrix::from_dense(Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("soft_threshold scalar and entrywise cases") {
  SymMatrix x(1), t(1);
  x.set(0, 0, 2.5);
  t.set(0, 0, 1.0);
  CHECK(soft_threshold(x, t)(0, 0) == doctest::Approx(1.5));

  // zero thresholds leave the input unchanged
  Rng rng(2);
  SymMatrix y = random_symmetric(rng, 5);
  SymMatrix z = soft_threshold(y, SymMatrix(5));
  CHECK(max_abs_diff(z.dense(), y.dense()) == 0.0);

  // 2x2 case worked by applying the scalar rule entrywise
  SymMatrix x2(2), t2(2);
  x2.set(0, 0, -0.3);
  x2.set(1, 0, 0.8);
  x2.set(1, 1, 2.0);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) t2.set(i, j, 0.5);
  SymMatrix out = soft_threshold(x2, t2);
  CHECK(out(0, 0) == doctest::Approx(0.0));
  CHECK(out(0, 1) == doctest::Approx(0.3));
  CHECK(out(1, 0) == doctest::Approx(0.3));
  CHECK(out(1, 1) == doctest::Approx(1.5));
}

TEST_CASE("soft_threshold errors") {
  Rng rng(3);
  SymMatrix x = random_symmetric(rng, 3);
  CHECK_THROWS_AS(soft_threshold(x, SymMatrix(4)), Error);
  SymMatrix neg(3);
  neg.set(1, 0, -0.1);
  try {
    soft_threshold(x, neg);
    FAIL("expected negative_threshold");
  } catch (const Error& e) {
    CHECK(e.code() == errc::negative_threshold);
  }
}

TEST_CASE("soft_threshold is a contraction toward zero") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    SymMatrix x = random_symmetric(rng, 4, 2.0);
    SymMatrix t = random_weights(rng, 4);
    SymMatrix out = soft_threshold(x, t);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(out(i, j)) <= std::abs(x(i, j)) + 1e-15);
  }
}

TEST_CASE("psd_project diagonal, idempotent, and hand case") {
  SymMatrix d = SymMatrix::from_diagonal(Eigen::Vector2d{1.0, -2.0});
  SymMatrix pd = psd_project(d);
  CHECK(pd(0, 0) == doctest::Approx(1.0));
  CHECK(pd(1, 1) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(5);
  SymMatrix already = random_pd(rng, 5);
  CHECK(max_abs_diff(psd_project(already).dense(), already.dense()) < 1e-10);

  // [[0,1],[1,0]] keeps only the +1 eigenbranch
  SymMatrix flip(2);
  flip.set(1, 0, 1.0);
  SymMatrix proj = psd_project(flip);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(proj(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("psd_project minimizes Frobenius distance to the cone") {
  Rng rng(6);
  for (int trial = 0; trial < 25; ++trial) {
    SymMatrix x = random_symmetric(rng, 4, 2.0);
    SymMatrix projected = psd_project(x);
    double best = (x.dense() - projected.dense()).norm();
    for (int other = 0; other < 20; ++other) {
      SymMatrix candidate = random_pd(rng, 4, 0.1);
      CHECK(best <= (x.dense() - candidate.dense()).norm() + 1e-12);
    }
    CHECK(min_eigenvalue(projected) >= -1e-10);
  }
}

TEST_CASE("eigen_sym contract: descending, orthonormal, reconstructs") {
  Rng rng(7);
  SymMatrix a = random_symmetric(rng, 8, 3.0);
  EigenPair ep = eigen_sym(a);
  for (Eigen::Index k = 0; k + 1 < 8; ++k) CHECK(ep.values[k] >= ep.values[k + 1]);
  Eigen::MatrixXd gram = ep.vectors.transpose() * ep.vectors;
  CHECK(max_abs_diff(gram, Eigen::MatrixXd::Identity(8, 8)) < 1e-10);
  Eigen::MatrixXd rebuilt = ep.vectors * ep.values.asDiagonal() * ep.vectors.transpose();
  CHECK((rebuilt - a.dense()).norm() <= 1e-10 * std::max(1.0, a.dense().norm()));
}

TEST_CASE("logdet_pd basic values and eigenvalue oracle") {
  CHECK(logdet_pd(SymMatrix::identity(7)) == doctest::Approx(0.0));
  CHECK(logdet_pd(SymMatrix::from_diagonal(Eigen::Vector2d{2.0, 3.0})) ==
        doctest::Approx(std::log(6.0)));

  Rng rng(8);
  SymMatrix a = random_pd(rng, 4);
  EigenPair ep = eigen_sym(a);
  double via_eigs = ep.values.array().log().sum();
  CHECK(logdet_pd(a) == doctest::Approx(via_eigs).epsilon(1e-10));

  // non-PD input names the failing pivot
  SymMatrix bad = SymMatrix::from_diagonal(Eigen::Vector3d{1.0, -1.0, 1.0});
  try {
    logdet_pd(bad);
    FAIL("expected not_positive_definite");
  } catch (const Error& e) {
    CHECK(e.code() == errc::not_positive_definite);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("logdet of inverse cancels") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    SymMatrix a = random_pd(rng, 5);
    Eigen::MatrixXd inv = a.dense().inverse();
    CHECK(logdet_pd(a) + logdet_pd(SymMatrix::from_dense(inv)) == doctest::Approx(0.0).epsilon(1e-8));
  }
}

TEST_CASE("woodbury_inverse special and random cases") {
  // Lambda = 0 gives Sigma_e^{-1}
  Rng rng(10);
  SymMatrix se = random_pd(rng, 5);
  Eigen::MatrixXd zero(5, 0);
  CHECK(max_abs_diff(woodbury_inverse(se, zero).dense(), se.dense().inverse()) < 1e-10);
  Eigen::MatrixXd zero2 = Eigen::MatrixXd::Zero(5, 2);
  CHECK(max_abs_diff(woodbury_inverse(se, zero2).dense(), se.dense().inverse()) < 1e-10);

  // Sherman-Morrison by hand: Sigma_e = I, Lambda = e1
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(4, 1);
  e1(0, 0) = 1.0;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(4, 4);
  expected(0, 0) = 0.5;
  CHECK(max_abs_diff(woodbury_inverse(SymMatrix::identity(4), e1).dense(), expected) < 1e-12);

  // dense-inverse oracle, p=6, r=2
  SymMatrix se6 = random_pd(rng, 6);
  Eigen::MatrixXd lam = random_matrix(rng, 6, 2);
  Eigen::MatrixXd direct = (lam * lam.transpose() + se6.dense()).inverse();
  CHECK(max_abs_diff(woodbury_inverse(se6, lam).dense(), direct) < 1e-8);
}

TEST_CASE("woodbury_inverse equals dense inverse up to p = 50") {
  Rng rng(11);
  for (Eigen::Index p : {10, 25, 50}) {
    SymMatrix se = random_pd(rng, p);
    Eigen::MatrixXd lam = random_matrix(rng, p, 3);
    Eigen::MatrixXd sy = lam * lam.transpose() + se.dense();
    Eigen::MatrixXd prod = woodbury_inverse(se, lam).dense() * sy;
    CHECK(max_abs_diff(prod, Eigen::MatrixXd::Identity(p, p)) < 1e-8);
  }
}

TEST_SUITE_END();
