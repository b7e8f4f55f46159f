#include "li/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "li/errors.hpp"
#include "li/litf.hpp"
#include "li/parallel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace li {

Dataset simulate_dataset(const SimConfig& cfg, int n_threads) {
  if (cfg.n_images < 2) throw ConfigError("simulate_dataset: need n_images >= 2");
  Dataset ds;
  ds.images.resize(cfg.n_images);
  ds.seed = cfg.seed;
  ds.generator = "lcmp";

  std::vector<SourceFeatures> table(cfg.n_images);
  parallel_for(cfg.n_images, n_threads, [&](int i) {
    SimulatedImage sim = simulate_image(cfg, i);
    ds.images[i] = std::move(sim.image);
    table[i] = std::move(sim.features);
  });

  generate_response(table, influence_vector(cfg));

  ds.source_feature_names = source_feature_names(cfg.n_classes);
  const int p = static_cast<int>(ds.source_feature_names.size());
  Matrix feats(cfg.n_images, p);
  ds.y.resize(cfg.n_images);
  for (int i = 0; i < cfg.n_images; ++i) {
    feats.row(i) = source_feature_row(table[i]).transpose();
    ds.y[i] = table[i].y;
  }
  ds.source_features = feats;
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  const int n = dataset.n();
  if (n == 0) throw DataError("save_dataset: empty dataset");
  const ImageTensor& first = dataset.images.front();

  json manifest;
  manifest["version"] = 1;
  manifest["n"] = n;
  manifest["image_shape"] = {first.width, first.height, first.channels};
  manifest["generator"] = dataset.generator;
  manifest["seed"] = dataset.seed;

  std::vector<std::string> files;
  files.reserve(n);
  char name[64];
  for (int i = 0; i < n; ++i) {
    const ImageTensor& img = dataset.images[i];
    if (img.width != first.width || img.height != first.height ||
        img.channels != first.channels)
      throw DataError("save_dataset: non-uniform image shapes");
    std::snprintf(name, sizeof(name), "image_%05d.litf", i);
    LitfTensor t;
    t.dims = {static_cast<std::uint32_t>(img.height),
              static_cast<std::uint32_t>(img.width),
              static_cast<std::uint32_t>(img.channels)};
    t.data = img.data;
    litf_write((fs::path(dir) / name).string(), t);
    files.push_back(name);
  }
  manifest["image_files"] = files;
  manifest["y"] = std::vector<double>(dataset.y.data(), dataset.y.data() + n);

  if (dataset.source_features) {
    const Matrix& sf = *dataset.source_features;
    LitfTensor t;
    t.dims = {static_cast<std::uint32_t>(sf.rows()),
              static_cast<std::uint32_t>(sf.cols())};
    t.data.reserve(sf.size());
    for (int i = 0; i < sf.rows(); ++i)
      for (int j = 0; j < sf.cols(); ++j)
        t.data.push_back(static_cast<float>(sf(i, j)));
    litf_write((fs::path(dir) / "source_features.litf").string(), t);
    manifest["source_features_file"] = "source_features.litf";
    manifest["source_feature_names"] = dataset.source_feature_names;
  }

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw DataError("save_dataset: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("load_dataset: cannot open " + manifest_path);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError("load_dataset: invalid JSON in " + manifest_path + ": " + e.what());
  }

  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset ds;
  ds.generator = manifest.value("generator", "external");
  ds.seed = manifest.value("seed", 0ULL);

  const auto files = manifest.at("image_files").get<std::vector<std::string>>();
  const int n = static_cast<int>(files.size());
  if (manifest.contains("n") && manifest.at("n").get<int>() != n)
    throw DataError("load_dataset: manifest n disagrees with image_files length");

  ds.images.reserve(n);
  int w = -1, h = -1, c = -1;
  for (const auto& file : files) {
    const std::string path = (base / file).string();
    LitfTensor t = litf_read(path);
    if (t.dims.size() != 3)
      throw DataError("load_dataset: " + path + " is not a 3-d image tensor");
    ImageTensor img(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0]),
                    static_cast<int>(t.dims[2]));
    img.data = std::move(t.data);
    if (w < 0) {
      w = img.width;
      h = img.height;
      c = img.channels;
    } else if (img.width != w || img.height != h || img.channels != c) {
      throw DataError("load_dataset: image shape mismatch in " + path);
    }
    ds.images.push_back(std::move(img));
  }

  const auto y = manifest.at("y").get<std::vector<double>>();
  if (static_cast<int>(y.size()) != n)
    throw DataError("load_dataset: response length disagrees with image count");
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]))
      throw DataError("load_dataset: non-finite response at index " + std::to_string(i));
    ds.y[i] = y[i];
  }

  if (manifest.contains("source_features_file")) {
    const std::string path =
        (base / manifest.at("source_features_file").get<std::string>()).string();
    LitfTensor t = litf_read(path);
    if (t.dims.size() != 2 || static_cast<int>(t.dims[0]) != n)
      throw DataError("load_dataset: bad source feature tensor in " + path);
    Matrix sf(n, t.dims[1]);
    for (int i = 0; i < n; ++i)
      for (std::uint32_t j = 0; j < t.dims[1]; ++j)
        sf(i, j) = t.data[static_cast<std::size_t>(i) * t.dims[1] + j];
    ds.source_features = sf;
    if (manifest.contains("source_feature_names"))
      ds.source_feature_names =
          manifest.at("source_feature_names").get<std::vector<std::string>>();
  }
  return ds;
}

}  // namespace li
