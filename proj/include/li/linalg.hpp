#pragma once

#include <Eigen/Dense>

namespace li {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SvdResult {
  Matrix u;        // m x r, orthonormal columns
  Vector s;        // r singular values, non-increasing
  Matrix vt;       // r x n, orthonormal rows
};

// Thin SVD. Contract: U diag(S) Vt reconstructs A to 1e-10 relative Frobenius.
SvdResult svd(const Matrix& a);

struct CholeskyResult {
  Matrix l;        // lower triangular, L L^T = A + jitter_used * I
  double jitter_used = 0.0;
};

// Cholesky of a symmetric PSD matrix, escalating jitter {0, j, 10j, ...} until
// the factorization succeeds. Throws NumericalError after 8 escalations.
CholeskyResult cholesky_psd(const Matrix& a, double jitter);

// Modified Bessel function of the second kind K_nu(x), nu > 0, x > 0.
double bessel_k(double nu, double x);

}  // namespace li
