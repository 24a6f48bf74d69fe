#pragma once

#include <Eigen/Dense>

#include "facov/errors.hpp"

namespace facov {

/**
 * Dense symmetric matrix with structurally enforced symmetry.
 *
 * Only the lower triangle is stored (packed, row-major); reads of (i, j) and
 * (j, i) resolve to the same slot, so entries stay exactly symmetric no
 * matter how they were produced.  Construction from a general dense matrix
 * takes the symmetric part (A + A^T)/2 once, after which no asymmetry can
 * accumulate through iterative updates.
 */
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Eigen::Index dim);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix from_dense(const Eigen::MatrixXd& a);
  static SymMatrix from_diagonal(const Eigen::VectorXd& d);

  Eigen::Index dim() const { return dim_; }

  double operator()(Eigen::Index i, Eigen::Index j) const {
    return tri_[packed_index(i, j)];
  }

  void set(Eigen::Index i, Eigen::Index j, double value) {
    tri_[packed_index(i, j)] = value;
  }

  /// Materializes the full dim x dim matrix.
  Eigen::MatrixXd dense() const;

  Eigen::VectorXd diagonal() const;
  double trace() const;
  double frobenius_norm() const;
  double max_abs_offdiag() const;
  bool all_nonnegative() const;
  bool zero_diagonal() const;

 private:
  Eigen::Index packed_index(Eigen::Index i, Eigen::Index j) const;

  Eigen::Index dim_ = 0;
  Eigen::VectorXd tri_;  // packed lower triangle, dim*(dim+1)/2 entries
};

/// Eigendecomposition of a symmetric matrix: eigenvalues sorted descending,
/// eigenvectors as orthonormal columns in matching order.
struct EigenPair {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

EigenPair eigen_sym(const SymMatrix& a);

/// Smallest eigenvalue only (no eigenvectors).
double min_eigenvalue(const SymMatrix& a);

/**
 * Lower Cholesky factor of a dense symmetric matrix.
 * Breakdown (a nonpositive pivot) is the library's definition of "not
 * positive definite"; the thrown error names the failing pivot.
 */
Eigen::MatrixXd cholesky_pd(const Eigen::MatrixXd& a);

/// Non-throwing variant; returns false on breakdown and reports the pivot.
bool try_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower,
                  Eigen::Index* failed_pivot = nullptr);

/// Solves A x = b for PD A given its lower Cholesky factor.
Eigen::MatrixXd cholesky_solve(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rhs);

/// Elementwise soft-thresholding: out_ij = sign(x_ij) * max(|x_ij| - t_ij, 0).
SymMatrix soft_threshold(const SymMatrix& x, const SymMatrix& thresholds);

/// Projection onto the PSD cone: eigenvalues clipped at zero.
SymMatrix psd_project(const SymMatrix& x);

/// log det of a positive definite matrix via Cholesky.
double logdet_pd(const SymMatrix& x);

/**
 * Inverse of Lambda Lambda^T + Sigma_e through the Woodbury identity, using
 * only a p x p Cholesky of Sigma_e and an r x r core solve.
 */
SymMatrix woodbury_inverse(const SymMatrix& sigma_e, const Eigen::MatrixXd& lambda);

}  // namespace facov
