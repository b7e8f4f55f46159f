#pragma once

#include <string>
#include <utility>
#include <vector>

#include "li/image.hpp"
#include "li/linalg.hpp"
#include "li/rng.hpp"

namespace li {

struct MaternParams {
  double sigma2 = 1.0;  // marginal variance
  double nu = 1.0;      // roughness
  double alpha = 1.0;   // bandwidth, in grid units
};

// Per-image latent parameters; the simulation's ground truth.
struct SourceFeatures {
  int n_cells = 0;
  double nu_lambda = 1.0;
  double alpha_lambda = 1.0;
  std::vector<double> beta;      // length R, class intercepts
  double nu_b = 1.0;
  double alpha_b = 1.0;
  double tau = 1.0;
  std::vector<double> lambda_r;  // length R, radius Gamma rates
  double y = 0.0;
};

struct CellRecord {
  double x = 0.0;      // unit-square coordinates in [0, 1)
  double y = 0.0;
  int cls = 0;         // 0-based class index
  double radius = 0.0; // unit-square length
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SimConfig {
  int n_images = 100;
  int grid_w = 64;
  int grid_h = 64;
  int n_classes = 3;
  std::uint64_t seed = 0;
  int field_entry_cap = 4096;  // max w*h per GP field

  // Per-image parameter ranges; each parameter is drawn uniformly.
  Range n_cells_range{50, 1000};
  Range nu_lambda_range{0, 8};
  Range alpha_lambda_range{0, 8};
  Range beta_range{-0.15, 0.15};
  Range nu_b_range{0, 3};
  Range alpha_b_range{0, 3};
  Range tau_range{0, 3};
  Range lambda_r_range{100, 500};

  // Response weights; layout matches source_feature_row().
  double infl_n_cells = 0.5;
  double infl_nu_lambda = -0.5;
  double infl_alpha_lambda = -0.5;
  double infl_beta_first = 1.0;
  double infl_beta_rest = -1.0;
  double infl_nu_b = -0.5;
  double infl_alpha_b = -0.5;
  double infl_tau = 0.5;
  double infl_lambda_first = 1.0;
  double infl_lambda_rest = 0.0;
};

// nu and alpha are clamped to >= 0.05 wherever fields are built; the raw draw
// is what enters the source-feature table.
inline constexpr double kMinRoughness = 0.05;
inline constexpr double kMinBandwidth = 0.05;

// Matern covariance at distance d; returns sigma2 at d = 0.
double matern_cov(double d, const MaternParams& p);

// Mean-zero Gaussian field on the w x h pixel grid with Matern covariance of
// pairwise pixel distances, sampled by dense Cholesky (jitter 1e-8 * sigma2).
Vector simulate_gp_field(int w, int h, const MaternParams& p, RngStream& rng,
                         int entry_cap = 4096);

struct IntensityFields {
  Vector lambda;               // overall intensity, length w*h, positive
  std::vector<Vector> b;       // R relative intensities, positive
};

IntensityFields build_intensities(const SourceFeatures& f, int w, int h,
                                  RngStream& rng, int entry_cap = 4096);

std::vector<CellRecord> sample_cells(const Vector& lambda,
                                     const std::vector<Vector>& b,
                                     const SourceFeatures& f, int w, int h,
                                     RngStream& rng);

// Binary w x h x R tensor: channel r is 1 where a class-r disc covers the
// pixel center.
ImageTensor rasterize(const std::vector<CellRecord>& cells, int w, int h, int n_classes);

// Column names of the source-feature table, in row layout order.
std::vector<std::string> source_feature_names(int n_classes);
// [N, nu_L, alpha_L, beta_1..R, nu_B, alpha_B, tau, lambda_1..R]
Vector source_feature_row(const SourceFeatures& f);
Vector influence_vector(const SimConfig& cfg);

// y_i = sum_k influence_k * standardized feature_ik; zero-variance features
// contribute nothing. Requires at least 2 samples. Writes y into the table.
void generate_response(std::vector<SourceFeatures>& table, const Vector& influences);

SourceFeatures draw_source_features(const SimConfig& cfg, RngStream& rng);

struct SimulatedImage {
  ImageTensor image;
  SourceFeatures features;
};

// One image plus its latent parameters; deterministic given (cfg.seed, index).
SimulatedImage simulate_image(const SimConfig& cfg, int index);

}  // namespace li
