#include "li/rcf.hpp"

#include <cmath>
#include <string>

#include "li/errors.hpp"

namespace li {

namespace {

// Flattened window at offset (u0, v0): iterate rows, cols, channels. `out`
// must be contiguous of length s*s*channels; matrix rows are not (the storage
// is column-major), so callers go through a scratch row vector.
void fill_window(const ImageTensor& img, int u0, int v0, int s, double* out) {
  int k = 0;
  for (int dv = 0; dv < s; ++dv)
    for (int du = 0; du < s; ++du)
      for (int ch = 0; ch < img.channels; ++ch)
        out[k++] = img.at(u0 + du, v0 + dv, ch);
}

}  // namespace

RcfModel sample_patches(const std::vector<ImageTensor>& images, int n_patches,
                        int patch_size, RngStream& rng) {
  if (images.empty()) throw DataError("sample_patches: empty training set");
  if (n_patches < 1) throw ConfigError("sample_patches: need at least one patch");
  const int c = images.front().channels;
  RcfModel model;
  model.patch_size = patch_size;
  model.channels = c;
  model.patches.resize(n_patches, patch_size * patch_size * c);
  model.patch_source_ids.resize(n_patches);
  Eigen::RowVectorXd scratch(patch_size * patch_size * c);
  for (int l = 0; l < n_patches; ++l) {
    const int idx = static_cast<int>(rng.uniform_int(images.size()));
    const ImageTensor& img = images[idx];
    if (patch_size > img.width || patch_size > img.height)
      throw DataError("sample_patches: patch size " + std::to_string(patch_size) +
                      " exceeds image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height));
    const int u0 = static_cast<int>(rng.uniform_int(img.width - patch_size + 1));
    const int v0 = static_cast<int>(rng.uniform_int(img.height - patch_size + 1));
    model.patch_source_ids[l] = idx;
    fill_window(img, u0, v0, patch_size, scratch.data());
    model.patches.row(l) = scratch;
  }
  return model;
}

Matrix featurize(const std::vector<ImageTensor>& images, const RcfModel& model) {
  const int n = static_cast<int>(images.size());
  const int L = static_cast<int>(model.patches.rows());
  const int s = model.patch_size;
  Matrix z(n, L);
  for (int i = 0; i < n; ++i) {
    const ImageTensor& img = images[i];
    if (img.channels != model.channels)
      throw DataError("featurize: image has " + std::to_string(img.channels) +
                      " channels, model expects " + std::to_string(model.channels));
    if (s > img.width || s > img.height)
      throw DataError("featurize: image smaller than patch size");
    const int nu = img.width - s + 1;
    const int nv = img.height - s + 1;
    const int n_pos = nu * nv;
    Matrix windows(n_pos, s * s * img.channels);
    Eigen::RowVectorXd scratch(windows.cols());
    int pos = 0;
    for (int v0 = 0; v0 < nv; ++v0)
      for (int u0 = 0; u0 < nu; ++u0) {
        fill_window(img, u0, v0, s, scratch.data());
        windows.row(pos++) = scratch;
      }

    if (model.nonlinearity == Nonlinearity::kNone) {
      // Averaging commutes with the inner product; one GEMV per image.
      const Vector mean_window = windows.colwise().mean();
      z.row(i) = (model.patches * mean_window).transpose();
    } else {
      Matrix acts = windows * model.patches.transpose();  // n_pos x L
      z.row(i) = acts.cwiseMax(0.0).colwise().mean();
    }
  }
  return z;
}

void fit_standardization(RcfModel& model, const Matrix& train_features) {
  const int n = static_cast<int>(train_features.rows());
  model.feature_center = train_features.colwise().mean();
  model.feature_scale.resize(train_features.cols());
  for (int j = 0; j < train_features.cols(); ++j) {
    const double var =
        (train_features.col(j).array() - model.feature_center[j]).square().sum() /
        std::max(1, n - 1);
    const double sd = std::sqrt(var);
    model.feature_scale[j] = sd > 0.0 ? sd : 1.0;
  }
}

Matrix apply_standardization(const RcfModel& model, const Matrix& features) {
  if (model.feature_center.size() != features.cols())
    throw DataError("apply_standardization: model not fitted for this width");
  return (features.rowwise() - model.feature_center.transpose()).array().rowwise() /
         model.feature_scale.transpose().array();
}

Vector ridge_fit(const Matrix& z, const Vector& y, double lambda) {
  if (lambda <= 0.0) throw ConfigError("ridge_fit: lambda must be positive");
  if (z.rows() != y.size()) throw DataError("ridge_fit: row/response mismatch");
  Matrix gram = z.transpose() * z;
  gram.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ridge_fit: normal-equation factorization failed");
  return llt.solve(z.transpose() * y);
}

Vector ridge_predict(const RcfModel& model, const std::vector<ImageTensor>& images) {
  if (model.beta.size() == 0) throw ConfigError("ridge_predict: model not fitted");
  const Matrix z = apply_standardization(model, featurize(images, model));
  return z * model.beta;
}

}  // namespace li
