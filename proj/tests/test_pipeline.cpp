#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "li/dataset.hpp"
#include "li/errors.hpp"
#include "li/litf.hpp"
#include "li/pipeline.hpp"

using namespace li;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("li_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

Dataset toy_dataset(int n, int w, int h, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_images = n;
  cfg.grid_w = w;
  cfg.grid_h = h;
  cfg.n_classes = 2;
  cfg.seed = seed;
  return simulate_dataset(cfg);
}

RunConfig toy_run_config(const fs::path& out_dir, std::uint64_t seed) {
  RunConfig cfg;
  cfg.b_replicates = 3;
  cfg.n_patches = 16;
  cfg.patch_size = 4;
  cfg.k_dims = 3;
  cfg.grid_size = 10;
  cfg.grid_ratio = 1e-2;
  cfg.n_subsamples = 20;
  cfg.out_dir = out_dir.string();
  cfg.seed = seed;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("litf round trip is bit exact") {
  const fs::path dir = temp_dir("litf");
  LitfTensor t;
  t.dims = {3, 2, 4};
  for (int i = 0; i < 24; ++i) t.data.push_back(1.0f / (i + 1) - 0.5f);
  const std::string path = (dir / "tensor.litf").string();
  litf_write(path, t);
  const LitfTensor back = litf_read(path);
  CHECK(back.dims == t.dims);
  CHECK(back.data == t.data);

  // Writing the same tensor twice gives identical bytes.
  const std::string path2 = (dir / "tensor2.litf").string();
  litf_write(path2, t);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("litf rejects corrupt and truncated files by name") {
  const fs::path dir = temp_dir("litf_bad");
  LitfTensor t;
  t.dims = {2, 2};
  t.data = {1.0f, 2.0f, 3.0f, 4.0f};
  const std::string path = (dir / "bad.litf").string();
  litf_write(path, t);

  std::string bytes = slurp(path);
  bytes[0] = 'X';
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    litf_read(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bad.litf") != std::string::npos);
  }

  litf_write(path, t);
  bytes = slurp(path);
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(litf_read(path), DataError);

  CHECK_THROWS_AS(litf_read((dir / "missing.litf").string()), DataError);
}

TEST_CASE("dataset save/load round trip preserves everything") {
  const fs::path dir = temp_dir("dataset");
  const Dataset d = toy_dataset(12, 12, 12, 77);
  save_dataset(d, dir.string());
  const Dataset back = load_dataset((dir / "manifest.json").string());

  REQUIRE(back.n() == 12);
  CHECK(back.generator == d.generator);
  CHECK(back.seed == d.seed);
  for (int i = 0; i < 12; ++i) {
    CHECK(back.images[i].data == d.images[i].data);
    CHECK(back.y[i] == doctest::Approx(d.y[i]).epsilon(1e-6));
  }
  REQUIRE(back.source_features.has_value());
  CHECK(back.source_features->rows() == 12);
  CHECK(back.source_feature_names == d.source_feature_names);

  CHECK_THROWS_AS(load_dataset((dir / "nope.json").string()), DataError);
}

TEST_CASE("external manifests over raw litf tensors are ingested as-is") {
  const fs::path dir = temp_dir("external");
  // Hand-write a minimal manifest: no generator, no seed, no source features,
  // 7-channel images (a shape the simulator never produces).
  const int n = 4, w = 5, h = 3, c = 7;
  for (int i = 0; i < n; ++i) {
    LitfTensor t;
    t.dims = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w),
              static_cast<std::uint32_t>(c)};
    for (int j = 0; j < w * h * c; ++j)
      t.data.push_back(static_cast<float>(i * 1000 + j));
    char name[32];
    std::snprintf(name, sizeof(name), "ext_%d.litf", i);
    litf_write((dir / name).string(), t);
  }
  std::ofstream(dir / "manifest.json")
      << "{\"image_files\": [\"ext_0.litf\", \"ext_1.litf\", \"ext_2.litf\", "
         "\"ext_3.litf\"], \"y\": [0.5, -1.25, 3.0, 0.0]}\n";

  const Dataset ds = load_dataset((dir / "manifest.json").string());
  REQUIRE(ds.n() == n);
  CHECK(ds.generator == "external");
  CHECK_FALSE(ds.source_features.has_value());
  CHECK(ds.images[0].width == w);
  CHECK(ds.images[0].height == h);
  CHECK(ds.images[0].channels == c);
  CHECK(ds.images[2].data[5] == 2005.0f);
  CHECK(ds.y[1] == -1.25);

  // A mismatched response length is a data error, not a crash.
  std::ofstream(dir / "manifest.json")
      << "{\"image_files\": [\"ext_0.litf\", \"ext_1.litf\"], \"y\": [1.0]}\n";
  CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), DataError);

  // Non-finite responses are rejected.
  std::ofstream(dir / "manifest.json")
      << "{\"image_files\": [\"ext_0.litf\"], \"y\": [1e999]}\n";
  CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), DataError);
}

TEST_CASE("simulated datasets are reproducible and thread independent") {
  const Dataset a = toy_dataset(8, 10, 10, 5);
  const Dataset b = toy_dataset(8, 10, 10, 5);
  for (int i = 0; i < 8; ++i) CHECK(a.images[i].data == b.images[i].data);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);

  SimConfig cfg;
  cfg.n_images = 8;
  cfg.grid_w = cfg.grid_h = 10;
  cfg.n_classes = 2;
  cfg.seed = 5;
  const Dataset c = simulate_dataset(cfg, 4);
  for (int i = 0; i < 8; ++i) CHECK(a.images[i].data == c.images[i].data);
  CHECK((a.y - c.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("split_samples partitions deterministically") {
  SplitConfig cfg;
  cfg.learn_fraction = 0.5;
  cfg.dev_fraction = 0.125;
  const SplitPlan plan = split_samples(100, cfg, 9);
  CHECK(plan.train.size() + plan.dev.size() == 50);
  CHECK(plan.infer.size() == 50);
  CHECK(plan.dev.size() == 6);  // round(0.125 * 50)

  std::set<int> all;
  for (int i : plan.train) all.insert(i);
  for (int i : plan.dev) all.insert(i);
  for (int i : plan.infer) all.insert(i);
  CHECK(all.size() == 100);

  const SplitPlan again = split_samples(100, cfg, 9);
  CHECK(again.train == plan.train);
  CHECK(again.infer == plan.infer);
  const SplitPlan other = split_samples(100, cfg, 10);
  CHECK(other.train != plan.train);

  cfg.learn_fraction = 0.9;
  CHECK(split_samples(100, cfg, 1).infer.size() == 10);

  cfg.learn_fraction = 1.5;
  CHECK_THROWS_AS(split_samples(100, cfg, 1), ConfigError);
  cfg.learn_fraction = 0.5;
  CHECK_THROWS_AS(split_samples(5, cfg, 1), ConfigError);
}

TEST_CASE("bootstrap draws only from train with the right distinct fraction") {
  SplitPlan plan;
  plan.train.resize(5000);
  std::iota(plan.train.begin(), plan.train.end(), 0);
  plan.infer = {5000, 5001};

  RngStream rng(13, 2);
  const auto boots = bootstrap_indices(plan, 4, rng);
  REQUIRE(boots.size() == 4);
  double distinct_acc = 0.0;
  for (const auto& set : boots) {
    REQUIRE(set.size() == 5000);
    std::set<int> uniq(set.begin(), set.end());
    for (int idx : uniq) CHECK(idx < 5000);
    distinct_acc += static_cast<double>(uniq.size()) / 5000.0;
  }
  CHECK(distinct_acc / 4 == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.03));
  CHECK(std::abs(distinct_acc / 4 - (1.0 - std::exp(-1.0))) < 0.02);

  RngStream r1(13, 2), r2(13, 2);
  CHECK(bootstrap_indices(plan, 2, r1) == bootstrap_indices(plan, 2, r2));
}

TEST_CASE("run_feature_learning produces distinct replicates deterministically") {
  const Dataset data = toy_dataset(20, 12, 12, 21);
  const SplitPlan plan = split_samples(20, {}, 21);

  RunConfig cfg = toy_run_config("", 21);
  cfg.b_replicates = 2;
  const auto reps = run_feature_learning(data, plan, cfg);
  REQUIRE(reps.size() == 2);
  CHECK(reps[0].features.values.rows() == 20);
  CHECK(reps[0].features.values.cols() == cfg.n_patches);
  CHECK(reps[0].features.replicate_id == 0);
  CHECK((reps[0].features.values - reps[1].features.values).cwiseAbs().maxCoeff() >
        0.0);

  // Parallel execution replays the serial result exactly.
  RunConfig cfg4 = cfg;
  cfg4.threads = 4;
  const auto reps4 = run_feature_learning(data, plan, cfg4);
  for (int b = 0; b < 2; ++b) {
    CHECK((reps[b].features.values - reps4[b].features.values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((reps[b].model.beta - reps4[b].model.beta).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("run_feature_learning on all-zero images yields zero features") {
  Dataset data;
  data.generator = "external";
  for (int i = 0; i < 12; ++i) {
    ImageTensor img;
    img.width = img.height = 8;
    img.channels = 1;
    img.data.assign(64, 0.0f);
    data.images.push_back(img);
  }
  data.y = Vector::Zero(12);

  const SplitPlan plan = split_samples(12, {}, 3);
  RunConfig cfg = toy_run_config("", 3);
  cfg.b_replicates = 2;
  cfg.n_patches = 8;
  const auto reps = run_feature_learning(data, plan, cfg);
  for (const auto& rep : reps)
    CHECK(rep.features.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_alignment writes the glyph CSV with n*B + n rows") {
  const fs::path dir = temp_dir("align");
  const Dataset data = toy_dataset(24, 12, 12, 31);
  const SplitPlan plan = split_samples(24, {}, 31);
  RunConfig cfg = toy_run_config(dir, 31);
  const auto reps = run_feature_learning(data, plan, cfg);
  std::vector<FeatureMatrix> mats;
  for (const auto& rep : reps) mats.push_back(rep.features);

  const AlignmentResult res = run_alignment(mats, data, cfg);
  CHECK(res.mean.rows() == 24);
  CHECK(res.mean.cols() == 3);
  CHECK(res.fss >= 0.0);

  const std::string csv = slurp(dir / "embeddings.csv");
  CHECK(count_lines(csv) == 1 + 24 * 3 + 24);
  CHECK(csv.rfind("sample,replicate,z1,z2,z3,y\n", 0) == 0);
  CHECK(fs::exists(dir / "alignment" / "mean.litf"));
  CHECK(fs::exists(dir / "alignment" / "aligned_rep_002.litf"));

  // Identical feature matrices collapse FSS to zero.
  std::vector<FeatureMatrix> same = {mats[0], mats[0], mats[0]};
  RunConfig quiet = cfg;
  quiet.out_dir.clear();
  CHECK(run_alignment(same, data, quiet).fss <= 1e-12);
}

TEST_CASE("run_selection emits full path CSVs and coherent scores") {
  const fs::path dir = temp_dir("select");
  const Dataset data = toy_dataset(40, 12, 12, 41);
  const SplitPlan plan = split_samples(40, {}, 41);
  RunConfig cfg = toy_run_config(dir, 41);

  const auto reps = run_feature_learning(data, plan, cfg);
  std::vector<FeatureMatrix> mats;
  for (const auto& rep : reps) mats.push_back(rep.features);
  RunConfig quiet = cfg;
  quiet.out_dir.clear();
  const AlignmentResult aligned = run_alignment(mats, data, quiet);

  const SelectionSummary summary = run_selection(aligned, data.y, plan, cfg);
  REQUIRE(summary.selected_sets.size() == 3);
  CHECK(summary.ss_scores.size() == 3);
  CHECK(summary.ss_scores.minCoeff() >= 0.0);
  CHECK(summary.ss_scores.maxCoeff() <= 1.0);
  CHECK(summary.lambda_star_index >= 0);
  CHECK(summary.lambda_star_index < cfg.grid_size);
  CHECK(summary.fp_bound_value ==
        doctest::Approx(fp_bound(summary.q_hat, 3, cfg.pi_thr)));

  // Splits with >= 4 rows each contribute B*K*G rows: train and test here
  // (the dev split has 3 rows at n = 40 and is skipped).
  const std::string csv = slurp(dir / "selection_paths.csv");
  const int expected_splits = 2;
  CHECK(count_lines(csv) == 1 + expected_splits * 3 * 3 * cfg.grid_size);
  CHECK(fs::exists(dir / "selection.json"));

  // An inference split below 4 rows is refused.
  SplitPlan tiny = plan;
  tiny.infer = {0, 1, 2};
  CHECK_THROWS_AS(run_selection(aligned, data.y, tiny, cfg), DataError);
}

TEST_CASE("run_selection finds a strongly predictive aligned feature") {
  // Hand-built alignment: feature 1 carries the response in every replicate.
  const int n = 60, k = 3, b_count = 4;
  RngStream rng(271, 0);
  AlignmentResult aligned;
  Vector y(n);
  Matrix base(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) base(i, j) = rng.normal();
  for (int i = 0; i < n; ++i) y[i] = 3.0 * base(i, 0) + 0.1 * rng.normal();
  for (int b = 0; b < b_count; ++b) {
    Matrix arm = base;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) arm(i, j) += 0.05 * rng.normal();
    aligned.aligned.push_back(arm);
  }
  aligned.mean = base;

  SplitPlan plan = split_samples(n, {}, 1);
  RunConfig cfg = toy_run_config("", 271);
  cfg.b_replicates = b_count;
  cfg.grid_ratio = 0.3;
  const SelectionSummary summary = run_selection(aligned, y, plan, cfg);
  CHECK(summary.ss_scores[0] == doctest::Approx(1.0));
  CHECK(summary.ss_scores[1] < 1.0);
  CHECK(summary.ss_scores[2] < 1.0);
}

TEST_CASE("run_cca_summary is exact when features equal the sources") {
  const int n = 60;
  const Dataset data = toy_dataset(n, 12, 12, 51);
  REQUIRE(data.source_features.has_value());

  // Use the first K standardized source columns as the "aligned" features.
  const Matrix& src = *data.source_features;
  const int k = 3;
  AlignmentResult aligned;
  Matrix z(n, k);
  for (int j = 0; j < k; ++j) {
    const double mean = src.col(j).mean();
    const double sd =
        std::sqrt((src.col(j).array() - mean).square().sum() / (n - 1));
    z.col(j) = (src.col(j).array() - mean) / sd;
  }
  aligned.aligned = {z, z};
  aligned.mean = z;

  const SplitPlan plan = split_samples(n, {}, 51);
  RunConfig cfg = toy_run_config("", 51);
  cfg.b_replicates = 2;
  cfg.k_dims = k;
  const auto rows = run_cca_summary(aligned, data, plan, cfg);
  REQUIRE(!rows.empty());
  for (const auto& row : rows) {
    CHECK(row.correlation >= 0.0);
    CHECK(row.correlation <= 1.0);
    if (row.dimension == 1) CHECK(row.correlation > 0.99);
  }

  Dataset no_src = data;
  no_src.source_features.reset();
  CHECK_THROWS_AS(run_cca_summary(aligned, no_src, plan, cfg), DataError);
}

TEST_CASE("baseline regression nails a realizable channel-mean target") {
  Dataset data;
  data.generator = "external";
  RngStream rng(281, 0);
  const int n = 30;
  for (int i = 0; i < n; ++i) {
    ImageTensor img;
    img.width = img.height = 6;
    img.channels = 2;
    img.data.resize(72);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    data.images.push_back(img);
  }
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    double m0 = 0.0, m1 = 0.0;
    for (int v = 0; v < 6; ++v)
      for (int u = 0; u < 6; ++u) {
        m0 += data.images[i].at(u, v, 0);
        m1 += data.images[i].at(u, v, 1);
      }
    data.y[i] = 2.0 * m0 / 36.0 - 1.0 * m1 / 36.0 + 0.25;
  }

  const SplitPlan plan = split_samples(n, {}, 61);
  RunConfig cfg = toy_run_config("", 61);
  const auto report = baseline_pixel_regression(data, plan, cfg);
  // One row per replicate and nonempty split.
  CHECK(report.size() == static_cast<std::size_t>(cfg.b_replicates) * 3);
  for (const auto& row : report) CHECK(row.mse <= 1e-8);

  // Constant response: intercept alone explains it.
  data.y.setConstant(4.2);
  for (const auto& row : baseline_pixel_regression(data, plan, cfg))
    CHECK(row.mse <= 1e-16);
}

TEST_CASE("run_all produces byte-identical outputs across thread counts") {
  const Dataset data = toy_dataset(40, 12, 12, 71);
  const fs::path dir1 = temp_dir("runall_t1");
  const fs::path dir4 = temp_dir("runall_t4");

  RunConfig cfg1 = toy_run_config(dir1, 71);
  RunConfig cfg4 = toy_run_config(dir4, 71);
  cfg4.threads = 4;

  const RunResult r1 = run_all(data, {}, cfg1);
  const RunResult r4 = run_all(data, {}, cfg4);
  CHECK(r1.alignment.fss == r4.alignment.fss);
  CHECK(r1.selection.selected_sets == r4.selection.selected_sets);

  for (const char* name :
       {"embeddings.csv", "selection_paths.csv", "cca_summary.csv", "split.json",
        "selection.json"}) {
    INFO(name);
    CHECK(slurp(dir1 / name) == slurp(dir4 / name));
  }
  CHECK(slurp(dir1 / "alignment" / "mean.litf") ==
        slurp(dir4 / "alignment" / "mean.litf"));
}
