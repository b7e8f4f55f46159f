#include "li/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "li/errors.hpp"
#include "li/litf.hpp"
#include "li/parallel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace li {

namespace {

// Fixed stream ids per pipeline stage; replicate/work streams hang off these.
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kBootstrapStream = 2;
constexpr std::uint64_t kLearnStream = 3;
constexpr std::uint64_t kSelectStream = 4;
constexpr std::uint64_t kBaselineStream = 5;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string rep_dir_name(int b) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rep_%03d", b);
  return buf;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    out.row(i) = m.row(rows[i]);
  return out;
}

Vector take_rows(const Vector& v, const std::vector<int>& rows) {
  Vector out(static_cast<int>(rows.size()));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) out[i] = v[rows[i]];
  return out;
}

LitfTensor to_litf(const Matrix& m) {
  LitfTensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()),
            static_cast<std::uint32_t>(m.cols())};
  t.data.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
  return t;
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Split labels in emission order.
const std::vector<std::pair<std::string, const std::vector<int> SplitPlan::*>>
    kSplits = {{"train", &SplitPlan::train},
               {"dev", &SplitPlan::dev},
               {"test", &SplitPlan::infer}};

}  // namespace

std::vector<int> SplitPlan::learn() const {
  std::vector<int> all = train;
  all.insert(all.end(), dev.begin(), dev.end());
  return all;
}

SplitPlan split_samples(int n, const SplitConfig& cfg, std::uint64_t seed) {
  if (n < 10) throw ConfigError("split_samples: need n >= 10");
  if (!(cfg.learn_fraction > 0.0 && cfg.learn_fraction < 1.0))
    throw ConfigError("split_samples: learn_fraction must lie in (0, 1)");
  if (!(cfg.dev_fraction >= 0.0 && cfg.dev_fraction < 1.0))
    throw ConfigError("split_samples: dev_fraction must lie in [0, 1)");

  RngStream rng(seed, kSplitStream);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < n - 1; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(n - i));
    std::swap(perm[i], perm[j]);
  }

  const int n_learn = static_cast<int>(std::lround(cfg.learn_fraction * n));
  const int n_dev = static_cast<int>(std::lround(cfg.dev_fraction * n_learn));

  SplitPlan plan;
  plan.learn_fraction = cfg.learn_fraction;
  plan.dev_fraction = cfg.dev_fraction;
  plan.seed = seed;
  plan.train.assign(perm.begin(), perm.begin() + (n_learn - n_dev));
  plan.dev.assign(perm.begin() + (n_learn - n_dev), perm.begin() + n_learn);
  plan.infer.assign(perm.begin() + n_learn, perm.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.dev.begin(), plan.dev.end());
  std::sort(plan.infer.begin(), plan.infer.end());
  return plan;
}

std::vector<std::vector<int>> bootstrap_indices(const SplitPlan& plan, int b,
                                                RngStream& rng) {
  if (b < 1) throw ConfigError("bootstrap_indices: need B >= 1");
  const int m = static_cast<int>(plan.train.size());
  if (m == 0) throw ConfigError("bootstrap_indices: empty train split");
  std::vector<std::vector<int>> out(b);
  for (auto& set : out) {
    set.reserve(m);
    for (int i = 0; i < m; ++i)
      set.push_back(plan.train[rng.uniform_int(m)]);
  }
  return out;
}

std::vector<LearnedReplicate> run_feature_learning(const Dataset& dataset,
                                                   const SplitPlan& plan,
                                                   const RunConfig& cfg) {
  if (cfg.b_replicates < 2) throw ConfigError("run_feature_learning: need B >= 2");
  RngStream boot_rng(cfg.seed, kBootstrapStream);
  const auto boots = bootstrap_indices(plan, cfg.b_replicates, boot_rng);

  // No-leakage guard: inference rows must never enter a bootstrap sample.
  {
    std::set<int> infer(plan.infer.begin(), plan.infer.end());
    for (const auto& set : boots)
      for (int idx : set)
        if (infer.count(idx))
          throw DataError("run_feature_learning: inference row in bootstrap sample");
  }

  const RngStream learn_root(cfg.seed, kLearnStream);
  std::vector<LearnedReplicate> reps(cfg.b_replicates);
  parallel_for(cfg.b_replicates, cfg.threads, [&](int b) {
    RngStream rng = learn_root.substream(b);
    std::vector<ImageTensor> boot_images;
    boot_images.reserve(boots[b].size());
    Vector boot_y(static_cast<int>(boots[b].size()));
    for (int i = 0; i < static_cast<int>(boots[b].size()); ++i) {
      boot_images.push_back(dataset.images[boots[b][i]]);
      boot_y[i] = dataset.y[boots[b][i]];
    }

    RcfModel model = sample_patches(boot_images, cfg.n_patches, cfg.patch_size, rng);
    model.nonlinearity = cfg.nonlinearity;
    model.ridge_lambda = cfg.ridge_lambda;
    const Matrix boot_features = featurize(boot_images, model);
    fit_standardization(model, boot_features);
    model.beta = ridge_fit(apply_standardization(model, boot_features), boot_y,
                           cfg.ridge_lambda);

    LearnedReplicate rep;
    rep.features.values = featurize(dataset.images, model);
    rep.features.replicate_id = b;
    rep.model = std::move(model);
    reps[b] = std::move(rep);
  });

  if (!cfg.out_dir.empty()) {
    for (int b = 0; b < cfg.b_replicates; ++b) {
      const fs::path dir = fs::path(cfg.out_dir) / "replicates" / rep_dir_name(b);
      fs::create_directories(dir);
      const RcfModel& model = reps[b].model;
      litf_write((dir / "patches.litf").string(), to_litf(model.patches));
      litf_write((dir / "features.litf").string(), to_litf(reps[b].features.values));
      json meta;
      meta["replicate"] = b;
      meta["ridge_lambda"] = model.ridge_lambda;
      meta["nonlinearity"] = model.nonlinearity == Nonlinearity::kRelu ? "relu" : "none";
      meta["patch_size"] = model.patch_size;
      meta["seed"] = cfg.seed;
      meta["patch_source_ids"] = model.patch_source_ids;
      meta["beta"] = std::vector<double>(model.beta.data(),
                                        model.beta.data() + model.beta.size());
      meta["feature_center"] = std::vector<double>(
          model.feature_center.data(),
          model.feature_center.data() + model.feature_center.size());
      meta["feature_scale"] = std::vector<double>(
          model.feature_scale.data(),
          model.feature_scale.data() + model.feature_scale.size());
      open_out(dir / "model.json") << meta.dump(2) << "\n";
    }
  }
  return reps;
}

AlignmentResult run_alignment(const std::vector<FeatureMatrix>& features,
                              const Dataset& dataset, const RunConfig& cfg) {
  const int b_count = static_cast<int>(features.size());
  if (b_count < 2) throw ConfigError("run_alignment: need B >= 2");

  std::vector<Matrix> reduced(b_count);
  parallel_for(b_count, cfg.threads, [&](int b) {
    ReducedFeatures red =
        cfg.reduction == ReductionMethod::kPca
            ? pca_reduce(features[b].values, cfg.k_dims)
            : sca_reduce(features[b].values, cfg.k_dims, cfg.sca_gamma);
    // Procrustes is rotation-only; center the coordinates first.
    reduced[b] = red.scores.rowwise() - red.scores.colwise().mean();
  });

  AlignmentResult result = generalized_procrustes(reduced);

  if (!cfg.out_dir.empty()) {
    const fs::path dir = fs::path(cfg.out_dir) / "alignment";
    fs::create_directories(dir);
    litf_write((dir / "mean.litf").string(), to_litf(result.mean));
    json meta;
    meta["fss"] = result.fss;
    meta["objective"] = result.objective;
    meta["sweeps"] = result.sweeps;
    meta["k"] = cfg.k_dims;
    meta["reduction"] = cfg.reduction == ReductionMethod::kPca ? "pca" : "sca";
    json rots = json::array();
    for (int b = 0; b < b_count; ++b) {
      litf_write((dir / ("aligned_" + rep_dir_name(b) + ".litf")).string(),
                 to_litf(result.aligned[b]));
      std::vector<double> flat(result.rotations[b].data(),
                               result.rotations[b].data() +
                                   result.rotations[b].size());
      rots.push_back(flat);
    }
    meta["rotations_col_major"] = rots;
    open_out(dir / "alignment.json") << meta.dump(2) << "\n";

    // Glyph data: B arm rows plus one mean row per sample.
    auto out = open_out(fs::path(cfg.out_dir) / "embeddings.csv");
    out << "sample,replicate";
    for (int k = 0; k < cfg.k_dims; ++k) out << ",z" << (k + 1);
    out << ",y\n";
    const int n = static_cast<int>(result.mean.rows());
    for (int i = 0; i < n; ++i) {
      for (int b = 0; b < b_count; ++b) {
        out << i << "," << b;
        for (int k = 0; k < cfg.k_dims; ++k)
          out << "," << fmt(result.aligned[b](i, k));
        out << "," << fmt(dataset.y[i]) << "\n";
      }
      out << i << ",mean";
      for (int k = 0; k < cfg.k_dims; ++k) out << "," << fmt(result.mean(i, k));
      out << "," << fmt(dataset.y[i]) << "\n";
    }
  }
  return result;
}

SelectionSummary run_selection(const AlignmentResult& aligned, const Vector& y,
                               const SplitPlan& plan, const RunConfig& cfg) {
  const int b_count = static_cast<int>(aligned.aligned.size());
  const int k = static_cast<int>(aligned.mean.cols());
  if (static_cast<int>(plan.infer.size()) < 4)
    throw DataError("run_selection: inference split smaller than 4");

  SelectionSummary summary;
  summary.pi_thr = cfg.pi_thr;

  // Shared grid per split: top point covers every replicate's lambda_max.
  std::vector<std::pair<std::string, std::vector<int>>> splits;
  for (const auto& [label, member] : kSplits) {
    const auto& rows = plan.*member;
    if (static_cast<int>(rows.size()) >= 4) splits.emplace_back(label, rows);
  }
  for (const auto& [label, rows] : splits) {
    double lmax = 0.0;
    const Vector ys = take_rows(y, rows);
    for (int b = 0; b < b_count; ++b)
      lmax = std::max(lmax, lasso_lambda_max(take_rows(aligned.aligned[b], rows), ys));
    summary.lambda_grids[label] =
        log_spaced_grid(lmax, cfg.grid_size, cfg.grid_ratio);
    summary.paths[label].resize(b_count);
  }

  const RngStream select_root(cfg.seed, kSelectStream);
  const int n_jobs = static_cast<int>(splits.size()) * b_count;
  parallel_for(n_jobs, cfg.threads, [&](int job) {
    const int si = job / b_count;
    const int b = job % b_count;
    const auto& [label, rows] = splits[si];
    RngStream rng = select_root.substream(si * 1000003ULL + b);
    summary.paths.at(label)[b] = selection_probabilities(
        take_rows(aligned.aligned[b], rows), take_rows(y, rows),
        summary.lambda_grids.at(label), cfg.n_subsamples, rng);
  });

  // Selection sets and SS scores come from the inference split.
  const auto& test_paths = summary.paths.at("test");
  double q_acc = 0.0;
  for (int b = 0; b < b_count; ++b) {
    summary.selected_sets.push_back(select_features(test_paths[b], cfg.pi_thr));
    summary.selected_sizes.push_back(
        static_cast<int>(summary.selected_sets.back().size()));
    q_acc += test_paths[b].q_hat;
  }
  summary.ss_scores = selection_stability(summary.selected_sets, k);
  summary.q_hat = q_acc / b_count;
  summary.fp_bound_value = fp_bound(summary.q_hat, k, cfg.pi_thr);

  // Operating lambda: grid point where the selected-set size is most
  // sensitive across subsamples, unless pinned by config.
  if (cfg.lambda_star_index >= 0) {
    summary.lambda_star_index = cfg.lambda_star_index;
  } else {
    Vector var_acc = Vector::Zero(cfg.grid_size);
    for (int b = 0; b < b_count; ++b) var_acc += test_paths[b].size_var;
    int arg_max = 0;
    var_acc.maxCoeff(&arg_max);
    summary.lambda_star_index = arg_max;
  }

  if (!cfg.out_dir.empty()) {
    auto out = open_out(fs::path(cfg.out_dir) / "selection_paths.csv");
    out << "replicate,split,feature,lambda,pi_hat\n";
    for (const auto& [label, rows] : splits) {
      const auto& grid = summary.lambda_grids[label];
      for (int b = 0; b < b_count; ++b) {
        const auto& pi = summary.paths[label][b].pi_hat;
        for (int j = 0; j < k; ++j)
          for (int gi = 0; gi < grid.size(); ++gi)
            out << b << "," << label << "," << (j + 1) << "," << fmt(grid[gi])
                << "," << fmt(pi(j, gi)) << "\n";
      }
    }

    json meta;
    meta["pi_thr"] = summary.pi_thr;
    meta["q_hat"] = summary.q_hat;
    meta["fp_bound"] = summary.fp_bound_value;
    meta["lambda_star_index"] = summary.lambda_star_index;
    meta["n_subsamples"] = cfg.n_subsamples;
    meta["ss_scores"] = std::vector<double>(
        summary.ss_scores.data(), summary.ss_scores.data() + summary.ss_scores.size());
    json sets = json::array();
    for (const auto& s : summary.selected_sets)
      sets.push_back(std::vector<int>(s.begin(), s.end()));
    meta["selected_sets"] = sets;
    meta["selected_sizes"] = summary.selected_sizes;
    open_out(fs::path(cfg.out_dir) / "selection.json") << meta.dump(2) << "\n";
  }
  return summary;
}

std::vector<CcaSummaryRow> run_cca_summary(const AlignmentResult& aligned,
                                           const Dataset& dataset,
                                           const SplitPlan& plan,
                                           const RunConfig& cfg) {
  if (!dataset.source_features)
    throw DataError(
        "run_cca_summary: dataset carries no source features; only simulated "
        "datasets support this summary");
  const Matrix& raw = *dataset.source_features;
  const int b_count = static_cast<int>(aligned.aligned.size());
  const int k = static_cast<int>(aligned.mean.cols());

  // Standardize source columns globally; constant columns are dropped.
  std::vector<int> kept;
  const int n = static_cast<int>(raw.rows());
  Vector mean = raw.colwise().mean();
  for (int j = 0; j < raw.cols(); ++j) {
    const double sd =
        std::sqrt((raw.col(j).array() - mean[j]).square().sum() / (n - 1));
    if (sd > 0.0) kept.push_back(j);
  }
  Matrix sources(n, static_cast<int>(kept.size()));
  for (int jj = 0; jj < static_cast<int>(kept.size()); ++jj) {
    const int j = kept[jj];
    const double sd =
        std::sqrt((raw.col(j).array() - mean[j]).square().sum() / (n - 1));
    sources.col(jj) = (raw.col(j).array() - mean[j]) / sd;
  }

  std::vector<CcaSummaryRow> rows_out;
  for (const auto& [label, member] : kSplits) {
    const auto& rows = plan.*member;
    const int n_rows = static_cast<int>(rows.size());
    const int k_cca = std::min<int>(k, static_cast<int>(kept.size()));
    if (n_rows <= std::max<int>(k, static_cast<int>(kept.size()))) continue;
    const Matrix src = take_rows(sources, rows);
    for (int b = 0; b < b_count; ++b) {
      const CcaResult res = cca(take_rows(aligned.aligned[b], rows), src, k_cca);
      for (int d = 0; d < k_cca; ++d)
        rows_out.push_back({b, label, d + 1, res.correlations[d]});
    }
  }

  if (!cfg.out_dir.empty()) {
    auto out = open_out(fs::path(cfg.out_dir) / "cca_summary.csv");
    out << "replicate,split,dimension,correlation\n";
    for (const auto& row : rows_out)
      out << row.replicate << "," << row.split << "," << row.dimension << ","
          << fmt(row.correlation) << "\n";
  }
  return rows_out;
}

std::vector<MseRow> baseline_pixel_regression(const Dataset& dataset,
                                              const SplitPlan& plan,
                                              const RunConfig& cfg) {
  const int n = dataset.n();
  if (n == 0) throw DataError("baseline_pixel_regression: empty dataset");
  const int c = dataset.images.front().channels;

  Matrix chan_means(n, c);
  for (int i = 0; i < n; ++i) {
    const ImageTensor& img = dataset.images[i];
    const double n_px = static_cast<double>(img.width) * img.height;
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) acc += img.at(u, v, ch);
      chan_means(i, ch) = acc / n_px;
    }
  }

  RngStream boot_rng(cfg.seed, kBaselineStream);
  const auto boots = bootstrap_indices(plan, cfg.b_replicates, boot_rng);

  std::vector<MseRow> report;
  for (int b = 0; b < cfg.b_replicates; ++b) {
    const Matrix xb = take_rows(chan_means, boots[b]);
    const Vector yb = take_rows(dataset.y, boots[b]);
    const Vector x_mean = xb.colwise().mean();
    const double y_mean = yb.mean();
    const Matrix xc = xb.rowwise() - x_mean.transpose();
    // Near-unpenalized fit; the intercept absorbs the means.
    const Vector beta = ridge_fit(xc, yb.array() - y_mean, 1e-8);

    for (const auto& [label, member] : kSplits) {
      const auto& rows = plan.*member;
      if (rows.empty()) continue;
      const Matrix xs = take_rows(chan_means, rows);
      const Vector ys = take_rows(dataset.y, rows);
      const Vector pred =
          ((xs.rowwise() - x_mean.transpose()) * beta).array() + y_mean;
      const double mse = (ys - pred).squaredNorm() / rows.size();
      report.push_back({b, label, mse});
    }
  }

  if (!cfg.out_dir.empty()) {
    auto out = open_out(fs::path(cfg.out_dir) / "baseline_mse.csv");
    out << "replicate,split,mse\n";
    for (const auto& row : report)
      out << row.replicate << "," << row.split << "," << fmt(row.mse) << "\n";
  }
  return report;
}

RunResult run_all(const Dataset& dataset, const SplitConfig& split_cfg,
                  const RunConfig& cfg) {
  RunResult result;
  result.plan = split_samples(dataset.n(), split_cfg, cfg.seed);

  if (!cfg.out_dir.empty()) {
    json meta;
    meta["seed"] = cfg.seed;
    meta["learn_fraction"] = result.plan.learn_fraction;
    meta["dev_fraction"] = result.plan.dev_fraction;
    meta["train"] = result.plan.train;
    meta["dev"] = result.plan.dev;
    meta["infer"] = result.plan.infer;
    open_out(fs::path(cfg.out_dir) / "split.json") << meta.dump(2) << "\n";
  }

  const auto features = run_feature_learning(dataset, result.plan, cfg);
  std::vector<FeatureMatrix> mats;
  mats.reserve(features.size());
  for (const auto& rep : features) mats.push_back(rep.features);

  result.alignment = run_alignment(mats, dataset, cfg);
  result.selection = run_selection(result.alignment, dataset.y, result.plan, cfg);
  if (dataset.source_features)
    result.cca_summary = run_cca_summary(result.alignment, dataset, result.plan, cfg);
  return result;
}

}  // namespace li
