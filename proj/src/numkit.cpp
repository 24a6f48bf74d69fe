#include "facov/numkit.hpp"

#include <cmath>
#include <string>

namespace facov {

namespace {

void require(bool cond, errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace

SymMatrix::SymMatrix(Eigen::Index dim) : dim_(dim) {
  require(dim >= 1, errc::invalid_argument, "SymMatrix: dim must be >= 1");
  tri_ = Eigen::VectorXd::Zero(dim * (dim + 1) / 2);
}

Eigen::Index SymMatrix::packed_index(Eigen::Index i, Eigen::Index j) const {
  require(i >= 0 && i < dim_ && j >= 0 && j < dim_, errc::invalid_argument,
          "SymMatrix: index out of range");
  if (i < j) std::swap(i, j);
  return i * (i + 1) / 2 + j;
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  SymMatrix out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) out.set(i, i, 1.0);
  return out;
}

SymMatrix SymMatrix::from_dense(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), errc::dimension_mismatch,
          "SymMatrix::from_dense: matrix is not square");
  SymMatrix out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      out.set(i, j, 0.5 * (a(i, j) + a(j, i)));
  return out;
}

SymMatrix SymMatrix::from_diagonal(const Eigen::VectorXd& d) {
  SymMatrix out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) out.set(i, i, d[i]);
  return out;
}

Eigen::MatrixXd SymMatrix::dense() const {
  Eigen::MatrixXd out(dim_, dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = tri_[i * (i + 1) / 2 + j];
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Eigen::VectorXd SymMatrix::diagonal() const {
  Eigen::VectorXd d(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) d[i] = (*this)(i, i);
  return d;
}

double SymMatrix::trace() const { return diagonal().sum(); }

double SymMatrix::frobenius_norm() const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = (*this)(i, j);
      sum += (i == j ? 1.0 : 2.0) * v * v;
    }
  }
  return std::sqrt(sum);
}

double SymMatrix::max_abs_offdiag() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i)
    for (Eigen::Index j = 0; j < i; ++j) m = std::max(m, std::abs((*this)(i, j)));
  return m;
}

bool SymMatrix::all_nonnegative() const {
  for (Eigen::Index i = 0; i < dim_; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      if ((*this)(i, j) < 0.0) return false;
  return true;
}

bool SymMatrix::zero_diagonal() const {
  for (Eigen::Index i = 0; i < dim_; ++i)
    if ((*this)(i, i) != 0.0) return false;
  return true;
}

EigenPair eigen_sym(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense());
  require(solver.info() == Eigen::Success, errc::eigen_failure,
          "eigen_sym: eigendecomposition did not converge");
  const Eigen::Index p = a.dim();
  EigenPair out;
  out.values.resize(p);
  out.vectors.resize(p, p);
  // Eigen returns ascending order; the library contract is descending.
  for (Eigen::Index k = 0; k < p; ++k) {
    out.values[k] = solver.eigenvalues()[p - 1 - k];
    out.vectors.col(k) = solver.eigenvectors().col(p - 1 - k);
  }
  return out;
}

double min_eigenvalue(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.dense(), Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, errc::eigen_failure,
          "min_eigenvalue: eigendecomposition did not converge");
  return solver.eigenvalues().minCoeff();
}

bool try_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower, Eigen::Index* failed_pivot) {
  const Eigen::Index n = a.rows();
  lower.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (d <= 0.0 || !std::isfinite(d)) {
      if (failed_pivot != nullptr) *failed_pivot = j;
      return false;
    }
    lower(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double s = lower.row(i).head(j).dot(lower.row(j).head(j));
      lower(i, j) = (a(i, j) - s) / lower(j, j);
    }
  }
  return true;
}

Eigen::MatrixXd cholesky_pd(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), errc::dimension_mismatch, "cholesky_pd: matrix is not square");
  Eigen::MatrixXd lower;
  Eigen::Index pivot = 0;
  if (!try_cholesky(a, lower, &pivot)) {
    throw Error(errc::not_positive_definite,
                "cholesky_pd: nonpositive pivot at index " + std::to_string(pivot));
  }
  return lower;
}

Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd y = lower.triangularView<Eigen::Lower>().solve(rhs);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

SymMatrix soft_threshold(const SymMatrix& x, const SymMatrix& thresholds) {
  require(x.dim() == thresholds.dim(), errc::dimension_mismatch,
          "soft_threshold: operand dimensions differ");
  require(thresholds.all_nonnegative(), errc::negative_threshold,
          "soft_threshold: threshold matrix has a negative entry");
  SymMatrix out(x.dim());
  for (Eigen::Index i = 0; i < x.dim(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = x(i, j);
      const double mag = std::abs(v) - thresholds(i, j);
      out.set(i, j, mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0);
    }
  }
  return out;
}

SymMatrix psd_project(const SymMatrix& x) {
  EigenPair ep = eigen_sym(x);
  Eigen::VectorXd clipped = ep.values.cwiseMax(0.0);
  Eigen::MatrixXd rebuilt = ep.vectors * clipped.asDiagonal() * ep.vectors.transpose();
  return SymMatrix::from_dense(rebuilt);
}

double logdet_pd(const SymMatrix& x) {
  Eigen::MatrixXd lower = cholesky_pd(x.dense());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) sum += std::log(lower(i, i));
  return 2.0 * sum;
}

SymMatrix woodbury_inverse(const SymMatrix& sigma_e, const Eigen::MatrixXd& lambda) {
  const Eigen::Index p = sigma_e.dim();
  const Eigen::Index r = lambda.cols();
  require(lambda.rows() == p, errc::dimension_mismatch,
          "woodbury_inverse: loading matrix row count does not match Sigma_e");
  require(r <= p, errc::dimension_mismatch, "woodbury_inverse: more factors than variables");

  Eigen::MatrixXd lower = cholesky_pd(sigma_e.dense());
  Eigen::MatrixXd sigma_inv = cholesky_solve(lower, Eigen::MatrixXd::Identity(p, p));
  if (r == 0) return SymMatrix::from_dense(sigma_inv);

  Eigen::MatrixXd b = sigma_inv * lambda;  // Sigma_e^{-1} Lambda, p x r
  Eigen::MatrixXd core =
      Eigen::MatrixXd::Identity(r, r) + lambda.transpose() * b;  // I_r + L^T S^-1 L
  Eigen::MatrixXd core_lower;
  Eigen::Index pivot = 0;
  if (!try_cholesky(core, core_lower, &pivot)) {
    throw Error(errc::singular_system,
                "woodbury_inverse: singular core matrix (pivot " + std::to_string(pivot) + ")");
  }
  Eigen::MatrixXd correction = b * cholesky_solve(core_lower, b.transpose());
  return SymMatrix::from_dense(sigma_inv - correction);
}

}  // namespace facov
