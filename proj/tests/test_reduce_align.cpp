#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "li/errors.hpp"
#include "li/reduce_align.hpp"
#include "li/rng.hpp"

using namespace li;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Orthonormal k x k matrix from the QR of a Gaussian draw.
Matrix random_rotation(int k, RngStream& rng) {
  const Matrix g = random_matrix(k, k, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(k, k);
  // Fix the sign convention so the factor is unique.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

Matrix standardized(const Matrix& z) {
  Matrix out = z.rowwise() - z.colwise().mean();
  for (int j = 0; j < out.cols(); ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / (z.rows() - 1));
    if (sd > 0) out.col(j) /= sd;
  }
  return out;
}

}  // namespace

TEST_CASE("pca_reduce recovers an exact low-rank structure") {
  RngStream rng(109, 0);
  const Matrix factors = random_matrix(40, 2, rng);
  const Matrix weights = random_matrix(2, 6, rng);
  const Matrix z = factors * weights;

  const ReducedFeatures red = pca_reduce(z, 3);
  REQUIRE(red.scores.cols() == 3);
  CHECK(red.variance_explained[0] > red.variance_explained[1]);
  CHECK(red.variance_explained[2] <= 1e-18);

  // Scores reproduce the centered, scaled data through the loadings.
  const Matrix x = standardized(z);
  CHECK((red.scores * red.loadings.transpose() - x).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pca_reduce matches the covariance eigendecomposition oracle") {
  RngStream rng(113, 0);
  const Matrix z = random_matrix(50, 4, rng);
  const ReducedFeatures red = pca_reduce(z, 4);

  const Matrix x = standardized(z);
  const Matrix cov = x.transpose() * x / (x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  // Eigen reports eigenvalues ascending.
  for (int j = 0; j < 4; ++j)
    CHECK(red.variance_explained[j] ==
          doctest::Approx(eig.eigenvalues()[3 - j]).epsilon(1e-9));

  // Loadings span the same axes up to sign; the sign rule makes each
  // column's largest-magnitude entry positive.
  for (int j = 0; j < 4; ++j) {
    const Vector a = red.loadings.col(j);
    const Vector b = eig.eigenvectors().col(3 - j);
    CHECK(std::abs(std::abs(a.dot(b)) - 1.0) <= 1e-8);
    int arg = 0;
    a.cwiseAbs().maxCoeff(&arg);
    CHECK(a[arg] > 0.0);
  }

  // Scores are uncorrelated with variances equal to the eigenvalues.
  const Matrix sc = red.scores.transpose() * red.scores / (x.rows() - 1);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j)
        CHECK(sc(i, j) == doctest::Approx(red.variance_explained[i]).epsilon(1e-9));
      else
        CHECK(std::abs(sc(i, j)) <= 1e-9);
    }
}

TEST_CASE("pca_reduce drops zero-variance columns") {
  RngStream rng(127, 0);
  Matrix z = random_matrix(20, 4, rng);
  z.col(2).setConstant(9.0);
  const ReducedFeatures red = pca_reduce(z, 2);
  REQUIRE(red.kept_columns.size() == 3);
  CHECK(red.kept_columns == std::vector<int>({0, 1, 3}));
  CHECK(red.loadings.rows() == 3);
}

TEST_CASE("sca_reduce with infinite gamma reproduces the PCA subspace") {
  RngStream rng(131, 0);
  const Matrix z = random_matrix(30, 5, rng);
  const ReducedFeatures pca = pca_reduce(z, 3);
  const ReducedFeatures sca = sca_reduce(z, 3, kInfGamma);

  // Same fitted subspace: projectors onto the score columns agree.
  auto projector = [](const Matrix& s) {
    const SvdResult dec = svd(s);
    const Matrix u = dec.u.leftCols(s.cols());
    return Matrix(u * u.transpose());
  };
  CHECK((projector(pca.scores) - projector(sca.scores)).cwiseAbs().maxCoeff() <=
        1e-6);
  for (int j = 0; j < 3; ++j)
    CHECK(sca.variance_explained[j] ==
          doctest::Approx(pca.variance_explained[j]).epsilon(1e-6));
}

TEST_CASE("sca_reduce keeps Y orthonormal and obeys the l1 budget") {
  RngStream rng(137, 0);
  const Matrix z = random_matrix(40, 6, rng);
  const double gamma = 3.0;
  const ReducedFeatures sca = sca_reduce(z, 2, gamma);
  const Matrix y = sca.loadings;
  CHECK((y.transpose() * y - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <=
        1e-8);
  CHECK(y.cwiseAbs().sum() <= gamma + 1e-6);

  // Tighter budget, sparser loadings.
  const ReducedFeatures loose = sca_reduce(z, 2, 100.0);
  CHECK(y.cwiseAbs().sum() <= loose.loadings.cwiseAbs().sum() + 1e-6);
}

TEST_CASE("sca_reduce orders dimensions by variance") {
  RngStream rng(139, 0);
  const Matrix z = random_matrix(35, 5, rng);
  const ReducedFeatures sca = sca_reduce(z, 3, 4.0);
  for (int j = 0; j + 1 < 3; ++j)
    CHECK(sca.variance_explained[j] >= sca.variance_explained[j + 1] - 1e-12);
}

TEST_CASE("procrustes_pair identity and planted rotation") {
  RngStream rng(149, 0);
  const Matrix x = random_matrix(25, 4, rng);
  const Matrix id = procrustes_pair(x, x);
  CHECK((id - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);

  for (int trial = 0; trial < 10; ++trial) {
    const Matrix r_true = random_rotation(4, rng);
    const Matrix y = x * r_true.transpose();  // y * r_true == x
    const Matrix r = procrustes_pair(x, y);
    CHECK((r - r_true).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((y * r - x).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((r.transpose() * r - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <=
          1e-10);
  }
}

TEST_CASE("procrustes_pair beats random rotations on noisy data") {
  RngStream rng(151, 0);
  const Matrix x = random_matrix(30, 3, rng);
  Matrix y = x * random_rotation(3, rng) + 0.1 * random_matrix(30, 3, rng);
  const Matrix r = procrustes_pair(x, y);
  const double best = (y * r - x).squaredNorm();
  for (int probe = 0; probe < 50; ++probe) {
    const Matrix q = random_rotation(3, rng);
    CHECK(best <= (y * q - x).squaredNorm() + 1e-9);
  }
}

TEST_CASE("generalized_procrustes on identical inputs is exact") {
  RngStream rng(157, 0);
  const Matrix x = random_matrix(20, 3, rng);
  const AlignmentResult res = generalized_procrustes({x, x, x});
  CHECK(res.fss <= 1e-16);
  CHECK((res.mean - x).cwiseAbs().maxCoeff() <= 1e-8);
  for (const auto& r : res.rotations)
    CHECK((r - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("generalized_procrustes undoes planted rotations") {
  RngStream rng(163, 0);
  const Matrix base = random_matrix(25, 4, rng);
  std::vector<Matrix> inputs;
  for (int b = 0; b < 5; ++b) inputs.push_back(base * random_rotation(4, rng));
  const AlignmentResult res = generalized_procrustes(inputs);
  CHECK(res.fss <= 1e-16);
  for (const auto& a : res.aligned)
    CHECK((a - res.mean).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("generalized_procrustes objective equals B times fss") {
  RngStream rng(167, 0);
  std::vector<Matrix> inputs;
  for (int b = 0; b < 4; ++b) inputs.push_back(random_matrix(15, 3, rng));
  const AlignmentResult res = generalized_procrustes(inputs);
  CHECK(res.objective == doctest::Approx(4.0 * res.fss).epsilon(1e-12));

  // Recompute the objective from the reported rotations and mean.
  double obj = 0.0;
  for (std::size_t b = 0; b < inputs.size(); ++b)
    obj += (inputs[b] * res.rotations[b] - res.mean).squaredNorm();
  CHECK(obj == doctest::Approx(res.objective).epsilon(1e-10));
}

TEST_CASE("fss with B = 2 symmetric perturbation equals the exact value") {
  // Two arms M +- E with E orthogonal to the rotation manifold trivially:
  // use E = 0 rotation-free by checking the objective formula directly on
  // already-aligned inputs.
  RngStream rng(173, 0);
  const Matrix m = random_matrix(12, 2, rng);
  Matrix e = random_matrix(12, 2, rng);
  e *= 0.01 / e.norm();  // small so the optimal rotations stay ~identity
  const AlignmentResult res = generalized_procrustes({m + e, m - e});
  CHECK(res.fss == doctest::Approx(e.squaredNorm()).epsilon(1e-4));
}

TEST_CASE("fss is invariant to rotating every input by the same matrix") {
  RngStream rng(179, 0);
  std::vector<Matrix> inputs;
  for (int b = 0; b < 3; ++b) inputs.push_back(random_matrix(18, 3, rng));
  const double fss0 = generalized_procrustes(inputs).fss;
  const Matrix q = random_rotation(3, rng);
  std::vector<Matrix> rotated;
  for (const auto& x : inputs) rotated.push_back(x * q);
  CHECK(generalized_procrustes(rotated).fss == doctest::Approx(fss0).epsilon(1e-8));
}

TEST_CASE("cca of a matrix with itself gives unit correlations") {
  RngStream rng(181, 0);
  const Matrix x = random_matrix(60, 4, rng);
  const CcaResult res = cca(x, x, 3);
  for (int j = 0; j < 3; ++j)
    CHECK(res.correlations[j] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("cca is invariant to invertible affine maps") {
  RngStream rng(191, 0);
  const Matrix x = random_matrix(80, 3, rng);
  const Matrix y = random_matrix(80, 3, rng);
  const CcaResult base = cca(x, y, 3, 1e-12);

  Matrix a = random_matrix(3, 3, rng);
  a += 3.0 * Matrix::Identity(3, 3);  // keep it well-conditioned
  Matrix xt = x * a;
  xt.rowwise() += Eigen::RowVector3d(5.0, -2.0, 0.5);
  const CcaResult mapped = cca(xt, y, 3, 1e-12);
  for (int j = 0; j < 3; ++j)
    CHECK(mapped.correlations[j] ==
          doctest::Approx(base.correlations[j]).epsilon(1e-6));
}

TEST_CASE("cca correlations are sorted in [0, 1] and independent data is low") {
  RngStream rng(193, 0);
  const Matrix x = random_matrix(500, 3, rng);
  const Matrix y = random_matrix(500, 3, rng);
  const CcaResult res = cca(x, y, 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(res.correlations[j] >= 0.0);
    CHECK(res.correlations[j] <= 1.0);
    if (j) CHECK(res.correlations[j] <= res.correlations[j - 1] + 1e-12);
  }
  CHECK(res.correlations[0] < 0.25);
}

TEST_CASE("svcca of a matrix with itself is 1 and survives rotation") {
  RngStream rng(197, 0);
  const Matrix x = random_matrix(50, 5, rng);
  CHECK(svcca_similarity(x, x, 3) == doctest::Approx(1.0).epsilon(1e-4));
  const Matrix q = random_rotation(5, rng);
  CHECK(svcca_similarity(x, x * q, 3) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("svcca null level for independent Gaussian data is small") {
  RngStream rng(199, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = random_matrix(1000, 10, rng);
    const Matrix y = random_matrix(1000, 10, rng);
    worst = std::max(worst, svcca_similarity(x, y, 5));
  }
  CHECK(worst < 0.15);
}
