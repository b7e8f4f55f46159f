#include "li/reduce_align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "li/errors.hpp"

namespace li {

namespace {

struct Preprocessed {
  Matrix x;  // centered, scaled, zero-variance columns dropped
  Vector center;
  Vector scale;
  std::vector<int> kept;
};

Preprocessed center_and_scale(const Matrix& z) {
  const int n = static_cast<int>(z.rows());
  const int p = static_cast<int>(z.cols());
  Preprocessed out;
  out.center = z.colwise().mean();
  out.scale = Vector::Ones(p);
  for (int j = 0; j < p; ++j) {
    const double var =
        (z.col(j).array() - out.center[j]).square().sum() / std::max(1, n - 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
      out.scale[j] = sd;
      out.kept.push_back(j);
    }
  }
  out.x.resize(n, static_cast<int>(out.kept.size()));
  for (int jj = 0; jj < static_cast<int>(out.kept.size()); ++jj) {
    const int j = out.kept[jj];
    out.x.col(jj) = (z.col(j).array() - out.center[j]) / out.scale[j];
  }
  return out;
}

// Orthonormal polar factor of A (tall or square).
Matrix polar_factor(const Matrix& a) {
  const SvdResult dec = svd(a);
  return dec.u * dec.vt;
}

Matrix center_columns(const Matrix& x) {
  return x.rowwise() - x.colwise().mean();
}

}  // namespace

ReducedFeatures pca_reduce(const Matrix& z, int k) {
  Preprocessed pre = center_and_scale(z);
  const int n = static_cast<int>(z.rows());
  if (k < 1 || k > std::min<int>(n, static_cast<int>(pre.x.cols())))
    throw ConfigError("pca_reduce: K = " + std::to_string(k) +
                      " out of range for " + std::to_string(n) + "x" +
                      std::to_string(pre.x.cols()) + " input");

  const SvdResult dec = svd(pre.x);
  ReducedFeatures out;
  out.method = ReductionMethod::kPca;
  out.center = pre.center;
  out.scale = pre.scale;
  out.kept_columns = pre.kept;
  out.scores = dec.u.leftCols(k) * dec.s.head(k).asDiagonal();
  out.loadings = dec.vt.topRows(k).transpose();
  out.variance_explained =
      dec.s.head(k).array().square() / std::max(1, n - 1);

  // Sign convention: largest-|entry| of each loading column positive.
  for (int j = 0; j < k; ++j) {
    int arg_max = 0;
    out.loadings.col(j).cwiseAbs().maxCoeff(&arg_max);
    if (out.loadings(arg_max, j) < 0.0) {
      out.loadings.col(j) = -out.loadings.col(j);
      out.scores.col(j) = -out.scores.col(j);
    }
  }
  return out;
}

ReducedFeatures sca_reduce(const Matrix& z, int k, double gamma,
                           int max_iters, double tol) {
  Preprocessed pre = center_and_scale(z);
  const Matrix& x = pre.x;
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (k < 1 || k > std::min(n, p))
    throw ConfigError("sca_reduce: K out of range");
  if (gamma <= 0.0) throw ConfigError("sca_reduce: gamma must be positive");

  // Warm start from the PCA factors.
  const SvdResult init = svd(x);
  Matrix zf = init.u.leftCols(k);                 // n x K orthonormal
  Matrix y = init.vt.topRows(k).transpose();      // p x K orthonormal
  Matrix b = zf.transpose() * x * y;              // K x K

  auto objective = [&](const Matrix& zf_, const Matrix& b_, const Matrix& y_) {
    return (x - zf_ * b_ * y_.transpose()).squaredNorm();
  };

  // Smallest soft threshold whose orthonormalized result satisfies the l1
  // budget, by bisection.
  auto thresholded_y = [&](const Matrix& target) {
    if (std::isinf(gamma)) return polar_factor(target);
    auto shrunk = [&](double t) {
      Matrix s = target.array().sign() * (target.array().abs() - t).max(0.0);
      return s;
    };
    Matrix cand = polar_factor(target);
    if (cand.cwiseAbs().sum() <= gamma) return cand;
    double lo = 0.0, hi = target.cwiseAbs().maxCoeff();
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      Matrix s = shrunk(mid);
      if (s.cwiseAbs().maxCoeff() == 0.0) {
        hi = mid;
        continue;
      }
      Matrix q = polar_factor(s);
      if (q.cwiseAbs().sum() <= gamma)
        hi = mid;
      else
        lo = mid;
    }
    Matrix s = shrunk(hi);
    if (s.cwiseAbs().maxCoeff() == 0.0)
      throw NumericalError("sca_reduce: l1 budget too tight to orthonormalize");
    return polar_factor(s);
  };

  // The PCA warm start ignores the l1 budget; project to a feasible iterate
  // first, and only measure descent from there.
  y = thresholded_y(x.transpose() * zf * b);
  zf = polar_factor(x * y * b.transpose());
  b = zf.transpose() * x * y;

  double prev = objective(zf, b, y);
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    const Matrix y_cand = thresholded_y(x.transpose() * zf * b);
    const Matrix zf_cand = polar_factor(x * y_cand * b.transpose());
    const Matrix b_cand = zf_cand.transpose() * x * y_cand;
    const double cur = objective(zf_cand, b_cand, y_cand);
    // The thresholded Y-update is a heuristic, not an exact constrained
    // minimizer; a step that fails to improve means it has stalled, so stop
    // at the last accepted iterate instead of emitting an ascent step.
    if (cur > prev - tol) break;
    y = y_cand;
    zf = zf_cand;
    b = b_cand;
    prev = cur;
  }

  ReducedFeatures out;
  out.method = ReductionMethod::kSca;
  out.center = pre.center;
  out.scale = pre.scale;
  out.kept_columns = pre.kept;
  out.scores = zf * b;
  out.loadings = y;

  // Order dimensions by the variance of their coordinates.
  Vector var(k);
  for (int j = 0; j < k; ++j)
    var[j] = out.scores.col(j).squaredNorm() / std::max(1, n - 1);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a1, int a2) { return var[a1] > var[a2]; });
  Matrix scores_sorted(n, k), loadings_sorted(p, k);
  Vector var_sorted(k);
  for (int j = 0; j < k; ++j) {
    scores_sorted.col(j) = out.scores.col(order[j]);
    loadings_sorted.col(j) = out.loadings.col(order[j]);
    var_sorted[j] = var[order[j]];
  }
  out.scores = scores_sorted;
  out.loadings = loadings_sorted;
  out.variance_explained = var_sorted;
  return out;
}

Matrix procrustes_pair(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw DataError("procrustes_pair: shape mismatch");
  const SvdResult dec = svd(y.transpose() * x);
  return dec.u * dec.vt;
}

AlignmentResult generalized_procrustes(const std::vector<Matrix>& reduced,
                                       int max_sweeps, double tol) {
  const int b_count = static_cast<int>(reduced.size());
  if (b_count < 2) throw ConfigError("generalized_procrustes: need B >= 2");
  for (const auto& m : reduced)
    if (m.rows() != reduced[0].rows() || m.cols() != reduced[0].cols())
      throw DataError("generalized_procrustes: inconsistent shapes");

  const int k = static_cast<int>(reduced[0].cols());
  AlignmentResult out;
  out.rotations.assign(b_count, Matrix::Identity(k, k));
  out.aligned = reduced;
  out.mean = reduced[0];

  auto total_objective = [&]() {
    double obj = 0.0;
    for (int b = 0; b < b_count; ++b)
      obj += (out.aligned[b] - out.mean).squaredNorm();
    return obj;
  };

  double prev = total_objective();
  for (out.sweeps = 0; out.sweeps < max_sweeps; ++out.sweeps) {
    for (int b = 0; b < b_count; ++b) {
      out.rotations[b] = procrustes_pair(out.mean, reduced[b]);
      out.aligned[b] = reduced[b] * out.rotations[b];
    }
    Matrix mean = Matrix::Zero(out.mean.rows(), k);
    for (const auto& a : out.aligned) mean += a;
    out.mean = mean / b_count;

    const double cur = total_objective();
    if (cur > prev + 1e-9 * (1.0 + prev))
      throw NumericalError("generalized_procrustes: objective increased");
    if (prev - cur < tol) {
      prev = cur;
      ++out.sweeps;
      break;
    }
    prev = cur;
  }
  out.objective = prev;
  out.fss = prev / b_count;
  return out;
}

double fss_score(const AlignmentResult& result) {
  const int b_count = static_cast<int>(result.aligned.size());
  double acc = 0.0;
  for (const auto& a : result.aligned) acc += (a - result.mean).squaredNorm();
  return acc / b_count;
}

namespace {

// V diag((l + eps)^(-1/2)) V^T; throws when a direction is numerically
// degenerate and no ridge was supplied.
Matrix inverse_sqrt_psd(const Matrix& sigma, double eps) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success)
    throw NumericalError("cca: eigendecomposition failed");
  Vector vals = eig.eigenvalues();
  Vector inv_sqrt(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    const double v = vals[i] + eps;
    if (v <= 0.0)
      throw NumericalError("cca: covariance numerically degenerate; supply eps");
    inv_sqrt[i] = 1.0 / std::sqrt(v);
  }
  return eig.eigenvectors() * inv_sqrt.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

CcaResult cca(const Matrix& x, const Matrix& y, int k, double eps) {
  const int n = static_cast<int>(x.rows());
  if (y.rows() != n) throw DataError("cca: row mismatch");
  const int p = static_cast<int>(x.cols());
  const int q = static_cast<int>(y.cols());
  if (k < 1 || k > std::min(p, q)) throw ConfigError("cca: K out of range");
  if (n <= std::max(p, q)) throw DataError("cca: need n > max(p, q)");

  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  const Matrix sxx = xc.transpose() * xc / (n - 1);
  const Matrix syy = yc.transpose() * yc / (n - 1);
  const Matrix sxy = xc.transpose() * yc / (n - 1);

  const double eps_x = eps >= 0.0 ? eps : 1e-6 * sxx.trace() / p;
  const double eps_y = eps >= 0.0 ? eps : 1e-6 * syy.trace() / q;
  const Matrix wx = inverse_sqrt_psd(sxx, eps_x);
  const Matrix wy = inverse_sqrt_psd(syy, eps_y);

  const SvdResult dec = svd(wx * sxy * wy);
  CcaResult out;
  out.regularization = std::max(eps_x, eps_y);
  out.correlations = dec.s.head(k).cwiseMin(1.0).cwiseMax(0.0);
  out.directions_x = wx * dec.u.leftCols(k);
  out.directions_y = wy * dec.vt.topRows(k).transpose();
  return out;
}

double svcca_similarity(const Matrix& x, const Matrix& y, int k) {
  const int n = static_cast<int>(x.rows());
  if (k < 1 ||
      k > std::min({n, static_cast<int>(x.cols()), static_cast<int>(y.cols())}))
    throw ConfigError("svcca_similarity: K out of range");
  const SvdResult dx = svd(center_columns(x));
  const SvdResult dy = svd(center_columns(y));
  const Matrix zx = dx.u.leftCols(k) * dx.s.head(k).asDiagonal();
  const Matrix zy = dy.u.leftCols(k) * dy.s.head(k).asDiagonal();
  // The truncated coordinates have a well-conditioned covariance by
  // construction; a ridge at the default scale would visibly bias the
  // correlations and break exact affine invariance.
  const double var_x = zx.squaredNorm() / (static_cast<double>(n - 1) * k);
  const double var_y = zy.squaredNorm() / (static_cast<double>(n - 1) * k);
  return cca(zx, zy, k, 1e-10 * std::max(var_x, var_y)).correlations.mean();
}

}  // namespace li
