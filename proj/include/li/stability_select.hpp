#pragma once

#include <set>
#include <vector>

#include "li/linalg.hpp"
#include "li/rng.hpp"

namespace li {

struct LassoPath {
  Vector lambda_grid;   // G, decreasing
  Matrix coefficients;  // G x p, in the original (unstandardized) inputs
  Vector intercepts;    // G
};

// lambda_max = max_j |x_j^T y| / n on the standardized design; smallest
// lambda with an all-zero solution.
double lasso_lambda_max(const Matrix& x, const Vector& y);

// G log-spaced points from lambda_max down to ratio * lambda_max.
Vector log_spaced_grid(double lambda_max, int g, double ratio);

// Default grid: log_spaced_grid of the data's own lambda_max.
Vector default_lambda_grid(const Matrix& x, const Vector& y, int g = 50,
                           double ratio = 1e-3);

// Cyclic coordinate descent with warm starts for
//   (1/2n) ||y - b0 - X b||^2 + lambda ||b||_1.
// Columns of x are standardized internally; KKT residuals <= 1e-6 at every
// grid point.
LassoPath lasso_path(const Matrix& x, const Vector& y, const Vector& grid,
                     int max_sweeps = 100000, double kkt_tol = 1e-6);

struct SelectionProbabilities {
  Matrix pi_hat;       // p x G selection frequencies
  Vector lambda_grid;  // G
  int n_subsamples = 0;
  double q_hat = 0.0;  // mean over subsamples of max_lambda #nonzero
  Vector size_mean;    // G, mean selected-set size per grid point
  Vector size_var;     // G, variance of selected-set size across subsamples
};

// Fraction of size-floor(n/2) subsamples (without replacement) where
// beta_j(lambda_g) is nonzero.
SelectionProbabilities selection_probabilities(const Matrix& x, const Vector& y,
                                               const Vector& grid, int n_reps,
                                               RngStream& rng);

// S = { j : max_lambda pi_hat_j >= pi_thr }, pi_thr in (0.5, 1].
std::set<int> select_features(const SelectionProbabilities& paths, double pi_thr);

// SS^k = fraction of sets containing k.
Vector selection_stability(const std::vector<std::set<int>>& selected_sets, int k);

// Expected false positives bound: q^2 / ((2 pi_thr - 1) p).
double fp_bound(double q, int p, double pi_thr);

}  // namespace li
