#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "li/dataset.hpp"
#include "li/rcf.hpp"
#include "li/reduce_align.hpp"
#include "li/stability_select.hpp"

namespace li {

struct SplitPlan {
  std::vector<int> train;  // I minus dev
  std::vector<int> dev;    // held out of the bootstrap, diagnostics only
  std::vector<int> infer;  // I^C
  double learn_fraction = 0.5;
  double dev_fraction = 0.125;
  std::uint64_t seed = 0;

  std::vector<int> learn() const;  // train + dev = I
};

struct SplitConfig {
  double learn_fraction = 0.5;
  double dev_fraction = 0.125;
};

struct RunConfig {
  int b_replicates = 20;
  // learner
  int n_patches = 1048;
  int patch_size = 8;
  Nonlinearity nonlinearity = Nonlinearity::kNone;
  double ridge_lambda = 1.0;
  // reduction
  ReductionMethod reduction = ReductionMethod::kPca;
  int k_dims = 10;
  double sca_gamma = kInfGamma;
  // selection
  int grid_size = 50;
  double grid_ratio = 1e-3;
  int n_subsamples = 250;
  double pi_thr = 0.75;
  int lambda_star_index = -1;  // -1: grid point with max selected-size variance
  // execution
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: LI_THREADS or 1
};

SplitPlan split_samples(int n, const SplitConfig& cfg, std::uint64_t seed);

// B multisets, each |train| draws with replacement from the train portion.
std::vector<std::vector<int>> bootstrap_indices(const SplitPlan& plan, int b,
                                                RngStream& rng);

struct LearnedReplicate {
  RcfModel model;
  FeatureMatrix features;  // n x L over the FULL dataset
};

// Algorithm: per replicate, sample patches from and fit the ridge head on the
// bootstrap sample, then featurize the full dataset. Persists each replicate
// under out_dir/replicates/rep_###/ when out_dir is nonempty.
std::vector<LearnedReplicate> run_feature_learning(const Dataset& dataset,
                                                   const SplitPlan& plan,
                                                   const RunConfig& cfg);

// Reduce each Z_b to K dims, align via generalized Procrustes, score FSS.
// Persists aligned tensors, rotations + fss JSON, and the glyph embedding CSV
// (n*B arm rows + n mean rows) when out_dir is nonempty.
AlignmentResult run_alignment(const std::vector<FeatureMatrix>& features,
                              const Dataset& dataset, const RunConfig& cfg);

struct SelectionSummary {
  // split label -> per-replicate selection paths
  std::map<std::string, std::vector<SelectionProbabilities>> paths;
  std::map<std::string, Vector> lambda_grids;
  std::vector<std::set<int>> selected_sets;  // from the test split
  Vector ss_scores;                          // K
  double pi_thr = 0.75;
  double q_hat = 0.0;       // test split
  double fp_bound_value = 0.0;
  int lambda_star_index = 0;
  std::vector<int> selected_sizes;  // |S_b| per replicate, test split
};

SelectionSummary run_selection(const AlignmentResult& aligned, const Vector& y,
                               const SplitPlan& plan, const RunConfig& cfg);

// Per replicate and split, CCA between aligned features and the standardized
// source columns. Emitted as long-format CSV when out_dir is nonempty.
struct CcaSummaryRow {
  int replicate;
  std::string split;
  int dimension;  // 1-based
  double correlation;
};
std::vector<CcaSummaryRow> run_cca_summary(const AlignmentResult& aligned,
                                           const Dataset& dataset,
                                           const SplitPlan& plan,
                                           const RunConfig& cfg);

struct MseRow {
  int replicate;
  std::string split;
  double mse;
};
// Ridge on per-channel mean pixel values; one row per bootstrap replicate and
// split.
std::vector<MseRow> baseline_pixel_regression(const Dataset& dataset,
                                              const SplitPlan& plan,
                                              const RunConfig& cfg);

struct RunResult {
  SplitPlan plan;
  AlignmentResult alignment;
  SelectionSummary selection;
  std::vector<CcaSummaryRow> cca_summary;  // empty without source features
};

// End-to-end Algorithms: split, bootstrap, learn, align, select, summarize.
RunResult run_all(const Dataset& dataset, const SplitConfig& split_cfg,
                  const RunConfig& cfg);

}  // namespace li
