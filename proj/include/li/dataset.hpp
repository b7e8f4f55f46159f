#pragma once

#include <optional>
#include <string>
#include <vector>

#include "li/image.hpp"
#include "li/lcmp.hpp"
#include "li/linalg.hpp"

namespace li {

struct Dataset {
  std::vector<ImageTensor> images;
  Vector y;
  std::optional<Matrix> source_features;       // n x p, simulation only
  std::vector<std::string> source_feature_names;
  std::uint64_t seed = 0;
  std::string generator;  // "lcmp" or "external"

  int n() const { return static_cast<int>(images.size()); }
};

// In-memory simulation of the full dataset; images parallelized over
// n_threads, output identical for any thread count.
Dataset simulate_dataset(const SimConfig& cfg, int n_threads = 1);

// Writes manifest.json, one LITF file per image, and source_features.litf
// when present.
void save_dataset(const Dataset& dataset, const std::string& dir);

// Reads a dataset written by save_dataset, or any manifest conforming to the
// same schema (external ingestion).
Dataset load_dataset(const std::string& manifest_path);

}  // namespace li
