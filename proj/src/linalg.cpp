#include "li/linalg.hpp"

#include <cmath>
#include <string>

#include "li/errors.hpp"

namespace li {

SvdResult svd(const Matrix& a) {
  if (!a.allFinite()) throw NumericalError("svd: input has non-finite entries");
  Eigen::JacobiSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw NumericalError("svd: decomposition did not converge");
  return {dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
}

CholeskyResult cholesky_psd(const Matrix& a, double jitter) {
  if (a.rows() != a.cols())
    throw NumericalError("cholesky_psd: matrix is not square");
  double j = 0.0;
  for (int attempt = 0; attempt < 9; ++attempt) {
    Matrix shifted = a;
    if (j > 0.0) shifted.diagonal().array() += j;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) return {Matrix(llt.matrixL()), j};
    j = (j == 0.0) ? jitter : 10.0 * j;
    if (j == 0.0) break;  // jitter == 0 given and plain factorization failed
  }
  throw NumericalError("cholesky_psd: not PSD after jitter escalation (last jitter " +
                       std::to_string(j) + ")");
}

double bessel_k(double nu, double x) {
  if (!(x > 0.0)) throw NumericalError("bessel_k: x must be positive");
  if (!(nu > 0.0)) throw NumericalError("bessel_k: nu must be positive");
  return std::cyl_bessel_k(nu, x);
}

}  // namespace li
