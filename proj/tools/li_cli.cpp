// li: simulate marked point-process images, learn random convolutional
// features under bootstrap perturbation, align the learned subspaces, and
// score their stability.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "li/dataset.hpp"
#include "li/errors.hpp"
#include "li/parallel.hpp"
#include "li/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = 0;
  li::SplitConfig split;
  li::RunConfig run;
  std::string nonlinearity = "none";
  std::string reduction = "pca";
};

void add_split_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--learn-fraction", opts.split.learn_fraction,
                  "Fraction of samples in the learning split I")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9))
      ->capture_default_str();
  cmd->add_option("--dev-fraction", opts.split.dev_fraction,
                  "Fraction of I held out as a development set")
      ->check(CLI::Range(0.0, 1.0 - 1e-9))
      ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, CommonOpts& opts, bool require_out) {
  cmd->add_option("--manifest", opts.manifest, "Dataset manifest.json")
      ->required();
  auto* seed = cmd->add_option("--seed", opts.seed, "Master seed");
  auto* out = cmd->add_option("--out-dir", opts.out_dir,
                              "Directory for run artifacts");
  if (require_out) {
    seed->required();
    out->required();
  }
  add_split_flags(cmd, opts);
  cmd->add_option("-B,--replicates", opts.run.b_replicates,
                  "Bootstrap replicates")
      ->check(CLI::Range(2, 10000))
      ->capture_default_str();
  cmd->add_option("-L,--n-patches", opts.run.n_patches, "Random patches")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--patch-size", opts.run.patch_size, "Patch side length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--nonlinearity", opts.nonlinearity,
                  "Per-position nonlinearity before pooling")
      ->check(CLI::IsMember({"none", "relu"}))
      ->capture_default_str();
  cmd->add_option("--ridge-lambda", opts.run.ridge_lambda,
                  "Ridge penalty of the feature head")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--reduction", opts.reduction, "Dimensionality reduction")
      ->check(CLI::IsMember({"pca", "sca"}))
      ->capture_default_str();
  cmd->add_option("-K,--k-dims", opts.run.k_dims, "Reduced dimensions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--sca-gamma", opts.run.sca_gamma,
                  "l1 budget for SCA loadings (inf disables)")
      ->capture_default_str();
  cmd->add_option("--grid-size", opts.run.grid_size, "Lambda grid points")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();
  cmd->add_option("--grid-ratio", opts.run.grid_ratio,
                  "lambda_min / lambda_max of the grid")
      ->check(CLI::Range(1e-12, 1.0))
      ->capture_default_str();
  cmd->add_option("--n-subsamples", opts.run.n_subsamples,
                  "Stability-selection subsamples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--pi-thr", opts.run.pi_thr, "Selection threshold in (0.5, 1]")
      ->capture_default_str();
  cmd->add_option("--lambda-star", opts.run.lambda_star_index,
                  "Operating grid index (-1: max size-variance rule)")
      ->capture_default_str();
  cmd->add_option("--threads", opts.run.threads,
                  "Worker threads (0: LI_THREADS or 1)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

li::RunConfig resolve_run(const CommonOpts& opts) {
  li::RunConfig cfg = opts.run;
  cfg.seed = opts.seed;
  cfg.out_dir = opts.out_dir;
  cfg.nonlinearity = opts.nonlinearity == "relu" ? li::Nonlinearity::kRelu
                                                 : li::Nonlinearity::kNone;
  cfg.reduction = opts.reduction == "sca" ? li::ReductionMethod::kSca
                                          : li::ReductionMethod::kPca;
  return cfg;
}

void write_split_json(const li::SplitPlan& plan, const std::string& out_dir) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  json meta;
  meta["seed"] = plan.seed;
  meta["learn_fraction"] = plan.learn_fraction;
  meta["dev_fraction"] = plan.dev_fraction;
  meta["train"] = plan.train;
  meta["dev"] = plan.dev;
  meta["infer"] = plan.infer;
  std::ofstream out(fs::path(out_dir) / "split.json");
  if (!out) throw li::DataError("cannot write split.json under " + out_dir);
  out << meta.dump(2) << "\n";
}

// Stages are deterministic functions of (dataset, seed, config); each
// subcommand replays the pipeline up to the stage whose artifacts it emits.
struct Stages {
  li::Dataset dataset;
  li::SplitPlan plan;
  std::vector<li::FeatureMatrix> features;
  li::AlignmentResult alignment;

  Stages(const CommonOpts& opts, const li::RunConfig& cfg, bool need_alignment)
      : dataset(li::load_dataset(opts.manifest)),
        plan(li::split_samples(dataset.n(), opts.split, cfg.seed)) {
    if (!need_alignment) return;
    li::RunConfig quiet = cfg;
    quiet.out_dir.clear();  // only the requested stage persists artifacts
    for (auto& rep : li::run_feature_learning(dataset, plan, quiet))
      features.push_back(std::move(rep.features));
    alignment = li::run_alignment(features, dataset, quiet);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Statistical stability of machine-learned image features: simulation, "
      "feature learning, subspace alignment, and stability selection"};
  app.require_subcommand(1);

  // simulate
  li::SimConfig sim;
  std::string sim_out;
  auto* simulate = app.add_subcommand(
      "simulate", "Simulate a marked point-process image dataset");
  simulate->add_option("-n,--n-images", sim.n_images, "Number of images")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--width", sim.grid_w, "Image width in pixels")
      ->check(CLI::Range(8, 1 << 16))
      ->capture_default_str();
  simulate->add_option("--height", sim.grid_h, "Image height in pixels")
      ->check(CLI::Range(8, 1 << 16))
      ->capture_default_str();
  simulate->add_option("-R,--classes", sim.n_classes, "Cell classes / channels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Master seed")->required();
  simulate->add_option("--out-dir", sim_out, "Output dataset directory")
      ->required();
  int sim_threads = 0;
  simulate->add_option("--threads", sim_threads,
                       "Worker threads (0: LI_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);

  CommonOpts opts;
  auto* split = app.add_subcommand("split", "Compute and persist a data split");
  auto* learn =
      app.add_subcommand("learn", "Learn bootstrap feature replicates");
  auto* align = app.add_subcommand(
      "align", "Reduce, align replicates, and score subspace stability");
  auto* select = app.add_subcommand(
      "select", "Stability selection over the aligned dimensions");
  auto* cca = app.add_subcommand(
      "cca-summary", "Canonical correlations against the source features");
  auto* baseline = app.add_subcommand(
      "baseline", "Ridge baseline on per-channel mean pixel values");
  auto* run_all = app.add_subcommand("run-all", "Full pipeline end to end");
  for (CLI::App* cmd : {split, learn, align, select, cca, baseline})
    add_run_flags(cmd, opts, /*require_out=*/false);
  add_run_flags(run_all, opts, /*require_out=*/true);

  try {
    app.parse(argc, argv);

    if (*simulate) {
      const li::Dataset dataset = li::simulate_dataset(
          sim, li::resolve_threads(sim_threads));
      li::save_dataset(dataset, sim_out);
      std::cout << "wrote " << dataset.n() << " images to " << sim_out << "\n";
      return 0;
    }

    const li::RunConfig cfg = resolve_run(opts);
    if (*split) {
      Stages st(opts, cfg, /*need_alignment=*/false);
      write_split_json(st.plan, cfg.out_dir);
      std::cout << "train " << st.plan.train.size() << ", dev "
                << st.plan.dev.size() << ", test " << st.plan.infer.size()
                << "\n";
    } else if (*learn) {
      Stages st(opts, cfg, /*need_alignment=*/false);
      li::run_feature_learning(st.dataset, st.plan, cfg);
      std::cout << "learned " << cfg.b_replicates << " replicates\n";
    } else if (*align) {
      Stages st(opts, cfg, /*need_alignment=*/false);
      li::RunConfig quiet = cfg;
      quiet.out_dir.clear();
      std::vector<li::FeatureMatrix> features;
      for (auto& rep : li::run_feature_learning(st.dataset, st.plan, quiet))
        features.push_back(std::move(rep.features));
      const li::AlignmentResult res =
          li::run_alignment(features, st.dataset, cfg);
      std::cout << "fss " << res.fss << " after " << res.sweeps << " sweeps\n";
    } else if (*select) {
      Stages st(opts, cfg, /*need_alignment=*/true);
      const li::SelectionSummary summary =
          li::run_selection(st.alignment, st.dataset.y, st.plan, cfg);
      std::cout << "selected sizes:";
      for (int s : summary.selected_sizes) std::cout << " " << s;
      std::cout << "\nfp bound " << summary.fp_bound_value << "\n";
    } else if (*cca) {
      Stages st(opts, cfg, /*need_alignment=*/true);
      const auto rows = li::run_cca_summary(st.alignment, st.dataset, st.plan, cfg);
      std::cout << rows.size() << " correlation rows\n";
    } else if (*baseline) {
      Stages st(opts, cfg, /*need_alignment=*/false);
      const auto report = li::baseline_pixel_regression(st.dataset, st.plan, cfg);
      std::cout << report.size() << " mse rows\n";
    } else if (*run_all) {
      const li::Dataset dataset = li::load_dataset(opts.manifest);
      const li::RunResult res = li::run_all(dataset, opts.split, cfg);
      std::cout << "fss " << res.alignment.fss << "\n";
      std::cout << "selected sizes:";
      for (int s : res.selection.selected_sizes) std::cout << " " << s;
      std::cout << "\nartifacts in " << cfg.out_dir << "\n";
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const li::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const li::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const li::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
}
