#include "li/stability_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "li/errors.hpp"

namespace li {

namespace {

struct StandardizedDesign {
  Matrix x;        // columns mean 0, ||x_j||^2 = n (constant columns zeroed)
  Vector x_mean;
  Vector x_scale;  // population SD; 1 for constant columns
  Vector y;        // centered
  double y_mean = 0.0;
};

StandardizedDesign standardize(const Matrix& x, const Vector& y) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  StandardizedDesign d;
  d.x_mean = x.colwise().mean();
  d.x_scale = Vector::Ones(p);
  d.x.resize(n, p);
  for (int j = 0; j < p; ++j) {
    Vector col = x.col(j).array() - d.x_mean[j];
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) {
      d.x_scale[j] = sd;
      d.x.col(j) = col / sd;
    } else {
      d.x.col(j).setZero();
    }
  }
  d.y_mean = y.mean();
  d.y = y.array() - d.y_mean;
  return d;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

double lasso_lambda_max(const Matrix& x, const Vector& y) {
  const StandardizedDesign d = standardize(x, y);
  const int n = static_cast<int>(x.rows());
  return (d.x.transpose() * d.y).cwiseAbs().maxCoeff() / n;
}

Vector log_spaced_grid(double lambda_max, int g, double ratio) {
  if (g < 2) throw ConfigError("log_spaced_grid: need at least 2 points");
  if (lambda_max <= 0.0) lambda_max = 1.0;  // degenerate pure-noise guard
  Vector grid(g);
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(ratio * lambda_max);
  for (int i = 0; i < g; ++i)
    grid[i] = std::exp(log_max + (log_min - log_max) * i / (g - 1));
  return grid;
}

Vector default_lambda_grid(const Matrix& x, const Vector& y, int g, double ratio) {
  return log_spaced_grid(lasso_lambda_max(x, y), g, ratio);
}

LassoPath lasso_path(const Matrix& x, const Vector& y, const Vector& grid,
                     int max_sweeps, double kkt_tol) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  const int g = static_cast<int>(grid.size());
  if (y.size() != n) throw DataError("lasso_path: row/response mismatch");
  for (int i = 1; i < g; ++i)
    if (grid[i] >= grid[i - 1])
      throw ConfigError("lasso_path: lambda grid must be strictly decreasing");

  const StandardizedDesign d = standardize(x, y);

  LassoPath path;
  path.lambda_grid = grid;
  path.coefficients = Matrix::Zero(g, p);
  path.intercepts.resize(g);

  Vector beta = Vector::Zero(p);
  Vector residual = d.y;

  for (int gi = 0; gi < g; ++gi) {
    const double lambda = grid[gi];
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double max_delta = 0.0;
      for (int j = 0; j < p; ++j) {
        if (d.x_scale[j] == 1.0 && d.x.col(j).isZero(0.0)) continue;
        const double old = beta[j];
        const double rho = old + d.x.col(j).dot(residual) / n;
        const double updated = soft_threshold(rho, lambda);
        if (updated != old) {
          residual += d.x.col(j) * (old - updated);
          beta[j] = updated;
          max_delta = std::max(max_delta, std::abs(updated - old));
        }
      }
      if (max_delta < 0.25 * kkt_tol) {
        // Full KKT check on the standardized problem.
        const Vector grad = d.x.transpose() * residual / n;
        bool ok = true;
        for (int j = 0; j < p; ++j) {
          if (beta[j] == 0.0) {
            if (std::abs(grad[j]) > lambda + kkt_tol) { ok = false; break; }
          } else if (std::abs(grad[j] - lambda * (beta[j] > 0 ? 1.0 : -1.0)) >
                     kkt_tol) {
            ok = false;
            break;
          }
        }
        if (ok) {
          converged = true;
          break;
        }
      }
    }
    if (!converged)
      throw NumericalError("lasso_path: no convergence at grid point " +
                           std::to_string(gi) + " (lambda = " +
                           std::to_string(lambda) + ")");

    // Back-transform to the raw inputs.
    double intercept = d.y_mean;
    for (int j = 0; j < p; ++j) {
      const double bj = beta[j] / d.x_scale[j];
      path.coefficients(gi, j) = bj;
      intercept -= bj * d.x_mean[j];
    }
    path.intercepts[gi] = intercept;
  }
  return path;
}

SelectionProbabilities selection_probabilities(const Matrix& x, const Vector& y,
                                               const Vector& grid, int n_reps,
                                               RngStream& rng) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (n < 4) throw DataError("selection_probabilities: need n >= 4");
  if (n_reps < 1) throw ConfigError("selection_probabilities: n_reps >= 1");
  const int m = n / 2;

  SelectionProbabilities out;
  out.pi_hat = Matrix::Zero(p, grid.size());
  out.lambda_grid = grid;
  out.n_subsamples = n_reps;

  const int g = static_cast<int>(grid.size());
  Vector size_sum = Vector::Zero(g);
  Vector size_sq = Vector::Zero(g);

  std::vector<int> pool(n);
  double q_acc = 0.0;
  for (int rep = 0; rep < n_reps; ++rep) {
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(n - i));
      std::swap(pool[i], pool[j]);
    }
    Matrix xs(m, p);
    Vector ys(m);
    for (int i = 0; i < m; ++i) {
      xs.row(i) = x.row(pool[i]);
      ys[i] = y[pool[i]];
    }
    const LassoPath path = lasso_path(xs, ys, grid);
    int q_rep = 0;
    for (int gi = 0; gi < g; ++gi) {
      int nonzero = 0;
      for (int j = 0; j < p; ++j) {
        if (path.coefficients(gi, j) != 0.0) {
          out.pi_hat(j, gi) += 1.0;
          ++nonzero;
        }
      }
      size_sum[gi] += nonzero;
      size_sq[gi] += static_cast<double>(nonzero) * nonzero;
      q_rep = std::max(q_rep, nonzero);
    }
    q_acc += q_rep;
  }
  out.pi_hat /= n_reps;
  out.q_hat = q_acc / n_reps;
  out.size_mean = size_sum / n_reps;
  out.size_var =
      (size_sq / n_reps - out.size_mean.cwiseProduct(out.size_mean)).cwiseMax(0.0);
  return out;
}

std::set<int> select_features(const SelectionProbabilities& paths, double pi_thr) {
  if (!(pi_thr > 0.5 && pi_thr <= 1.0))
    throw ConfigError("select_features: pi_thr must be in (0.5, 1]");
  std::set<int> selected;
  for (int j = 0; j < paths.pi_hat.rows(); ++j)
    if (paths.pi_hat.row(j).maxCoeff() >= pi_thr) selected.insert(j);
  return selected;
}

Vector selection_stability(const std::vector<std::set<int>>& selected_sets, int k) {
  if (selected_sets.empty())
    throw ConfigError("selection_stability: need at least one set");
  Vector scores = Vector::Zero(k);
  for (const auto& s : selected_sets)
    for (int j : s)
      if (j >= 0 && j < k) scores[j] += 1.0;
  return scores / static_cast<double>(selected_sets.size());
}

double fp_bound(double q, int p, double pi_thr) {
  if (!(pi_thr > 0.5)) throw ConfigError("fp_bound: pi_thr must exceed 0.5");
  if (q < 0.0 || p < 1) throw ConfigError("fp_bound: invalid q or p");
  return q * q / ((2.0 * pi_thr - 1.0) * p);
}

}  // namespace li
