#pragma once

#include <limits>
#include <vector>

#include "li/linalg.hpp"

namespace li {

enum class ReductionMethod { kPca, kSca };

struct ReducedFeatures {
  Matrix scores;              // n x K
  Matrix loadings;            // L_kept x K
  Vector variance_explained;  // K, non-increasing
  ReductionMethod method = ReductionMethod::kPca;
  Vector center;              // length L (pre-drop)
  Vector scale;               // length L (pre-drop)
  std::vector<int> kept_columns;  // columns surviving the zero-variance drop
};

struct AlignmentResult {
  Matrix mean;                  // n x K consensus M
  std::vector<Matrix> rotations;  // B orthonormal K x K
  std::vector<Matrix> aligned;    // B matrices n x K
  double fss = 0.0;
  double objective = 0.0;       // final total Procrustes objective (= B * fss)
  int sweeps = 0;
};

struct CcaResult {
  Vector correlations;  // K, in [0,1], non-increasing
  Matrix directions_x;  // p x K
  Matrix directions_y;  // q x K
  double regularization = 0.0;
};

// Top-K principal scores of the centered, scaled matrix; zero-variance
// columns are dropped first. Sign fixed so each loading column's
// largest-magnitude entry is positive.
ReducedFeatures pca_reduce(const Matrix& z, int k);

// Sparse components: min ||X - Z B Y^T||_F with orthonormal Z, Y and
// ||Y||_1 <= gamma, by block alternation. gamma = inf disables the
// constraint and the solution matches rank-K PCA.
ReducedFeatures sca_reduce(const Matrix& z, int k, double gamma,
                           int max_iters = 200, double tol = 1e-6);

// Orthonormal R minimizing ||X - Y R||_F, from the SVD of Y^T X.
Matrix procrustes_pair(const Matrix& x, const Matrix& y);

// Cyclic R_b / M updates starting from M = inputs[0]; the total objective is
// non-increasing every sweep.
AlignmentResult generalized_procrustes(const std::vector<Matrix>& reduced,
                                       int max_sweeps = 500, double tol = 1e-8);

// (1/B) sum_b ||aligned_b - M||_F^2
double fss_score(const AlignmentResult& result);

// Regularized CCA; correlations are the top-K singular values of the
// whitened cross-covariance. eps < 0 selects the default 1e-6 * trace/dim.
CcaResult cca(const Matrix& x, const Matrix& y, int k, double eps = -1.0);

// SVD-truncate both inputs to their top-K coordinates, then mean canonical
// correlation.
double svcca_similarity(const Matrix& x, const Matrix& y, int k);

inline constexpr double kInfGamma = std::numeric_limits<double>::infinity();

}  // namespace li
