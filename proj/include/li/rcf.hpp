#pragma once

#include <vector>

#include "li/image.hpp"
#include "li/linalg.hpp"
#include "li/rng.hpp"

namespace li {

enum class Nonlinearity { kNone, kRelu };

// Fixed random convolution filters plus a ridge head. Patches are stored as
// flattened s*s*c rows of a single matrix.
struct RcfModel {
  int patch_size = 8;
  int channels = 0;
  Matrix patches;                    // L x (s*s*c)
  std::vector<int> patch_source_ids; // sample index each patch was cut from
  Nonlinearity nonlinearity = Nonlinearity::kNone;
  double ridge_lambda = 1.0;
  Vector beta;                       // length L, empty before fit
  Vector feature_center;             // training-split column means
  Vector feature_scale;              // training-split column SDs (1 where 0)
};

struct FeatureMatrix {
  Matrix values;       // n x L
  int replicate_id = 0;
};

// L patches, each cut from a uniformly chosen training image at a uniformly
// chosen valid offset. Source ids index into `images`.
RcfModel sample_patches(const std::vector<ImageTensor>& images, int n_patches,
                        int patch_size, RngStream& rng);

// z_il = mean over valid convolution positions of <patch_l, window>, with
// optional ReLU applied per position before averaging.
Matrix featurize(const std::vector<ImageTensor>& images, const RcfModel& model);

// Standardization statistics used before the ridge head; columns with zero
// variance get scale 1.
void fit_standardization(RcfModel& model, const Matrix& train_features);
Matrix apply_standardization(const RcfModel& model, const Matrix& features);

// argmin ||y - Z b||^2 + lambda ||b||^2 via normal equations + Cholesky.
Vector ridge_fit(const Matrix& z, const Vector& y, double lambda);

Vector ridge_predict(const RcfModel& model, const std::vector<ImageTensor>& images);

}  // namespace li
