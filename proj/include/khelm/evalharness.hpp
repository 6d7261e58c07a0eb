#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "khelm/bccpm.hpp"
#include "khelm/elmkit.hpp"
#include "khelm/lbem.hpp"
#include "khelm/timeseries.hpp"

namespace khelm::evalharness {

/// Labels in files are -1 / +1; class indices are 0 / 1 respectively.
int class_of_label(int label);
int label_of_class(int class_index);

struct FoldPlan {
  int k = 5;
  std::vector<int> assignments;  // fold index per sample
  int repeat_index = 0;
  std::uint64_t seed = 0;

  std::vector<Eigen::Index> test_indices(int fold) const;
  std::vector<Eigen::Index> train_indices(int fold) const;
};

/// Per-class shuffled round-robin assignment. Throws PlanError naming the class
/// when it has fewer than k samples.
FoldPlan stratified_folds(const std::vector<int>& classes, int k, std::uint64_t seed, int repeat_index = 0);

/// Trained predictor mapping feature rows to class indices.
using Classifier = std::function<std::vector<int>(const Eigen::MatrixXd&)>;
using Trainer = std::function<Classifier(const elmkit::LabeledDataset&, std::uint64_t seed)>;

Trainer khelm_trainer(const elmkit::KhElmConfig& config);
Trainer kelm_trainer(const elmkit::KernelSpec& kernel, double rho);

struct CvOptions {
  int k = 5;
  int repeats = 30;
  int jobs = 1;
};

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  std::vector<double> class_accuracy;
};

struct EvalReport {
  std::string label;
  int k = 0;
  int repeats = 0;
  int class_count = 2;
  std::uint64_t seed = 0;
  std::vector<FoldResult> cells;  // ordered by (repeat, fold)
  Eigen::MatrixXd fold_accuracy;  // k x G, averaged over repeats
  Eigen::VectorXd class_average;  // G, mean of the fold rows
  nlohmann::json config = nlohmann::json::object();

  /// Mean of the per-class averages.
  double mean_accuracy() const;
};

/// Fraction of class-c test samples predicted as c, for each c.
std::vector<double> per_class_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted,
                                       int class_count);

/// Repeat r uses the plan from derive_seed(seed, {r}); the model for fold f of
/// repeat r is trained with derive_seed(seed, {r, f}).
EvalReport cross_validate(const elmkit::LabeledDataset& data, const Trainer& trainer, const CvOptions& options,
                          std::uint64_t seed, std::string label = {}, nlohmann::json config = nlohmann::json::object());

/// Optional prior overrides; unset fields use NiwPrior::default_for.
struct PriorOverrides {
  std::optional<double> kappa0;
  std::optional<double> nu0;
  std::optional<double> lambda_scale;
};

struct PipelineConfig {
  PriorOverrides prior;
  int burn_in = 500;
  int samples = 1500;
  std::optional<int> min_block_length;
  lbem::FeatureOptions lbem;
  elmkit::KhElmConfig model;
  CvOptions cv;
};

struct Cohort {
  std::vector<RoiTimeSeries> subjects;
  std::vector<int> labels;  // -1 / +1
};

struct ExtractedFeatures {
  elmkit::LabeledDataset data;
  std::vector<ChangePointMask> masks;
  std::vector<bccpm::PosteriorSummary> posteriors;  // empty without BCCPM
};

bccpm::NiwPrior make_prior(const RoiTimeSeries& series, const PriorOverrides& overrides);
bccpm::McmcConfig make_mcmc(const PipelineConfig& config, Eigen::Index roi_count, std::uint64_t seed);

/// Standardizes each subject, segments it (MAP mask, or the single-block mask
/// when use_bccpm is false) and computes LBEM features. Subject s samples with
/// derive_seed(seed, {s}).
ExtractedFeatures extract_features(const Cohort& cohort, const PipelineConfig& config, bool use_bccpm,
                                   std::uint64_t seed, int jobs);

enum class Experiment { bccpm_ablation, kernel_compare, depth_sweep };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

/// bccpm-ablation: BCCPM masks vs single-block masks; kernel-compare: rbf vs
/// linear head; depth-sweep: 1..6 layers of size model.layer_sizes.front().
/// Every variant shares the same cross-validation seed, hence the same folds.
std::vector<EvalReport> run_comparison(const Cohort& cohort, Experiment experiment, const PipelineConfig& config,
                                       std::uint64_t seed);

/// Same as above on features already extracted with BCCPM (and, for the
/// ablation, without).
std::vector<EvalReport> run_comparison(const ExtractedFeatures& with_bccpm,
                                       const std::optional<ExtractedFeatures>& without_bccpm,
                                       Experiment experiment, const PipelineConfig& config, std::uint64_t seed);

nlohmann::json model_config_json(const elmkit::KhElmConfig& config);

/// Fold rows, one column per class, and an average row in percent.
std::string render_table(const EvalReport& report);

}  // namespace khelm::evalharness
