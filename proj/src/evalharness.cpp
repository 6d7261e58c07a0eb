#include "khelm/evalharness.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "khelm/error.hpp"
#include "khelm/parallel.hpp"
#include "khelm/rng.hpp"

namespace khelm::evalharness {

int class_of_label(int label) {
  if (label == -1) return 0;
  if (label == 1) return 1;
  throw ConfigError("labels must be -1 or +1, got " + std::to_string(label));
}

int label_of_class(int class_index) { return class_index == 0 ? -1 : 1; }

std::vector<Eigen::Index> FoldPlan::test_indices(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

std::vector<Eigen::Index> FoldPlan::train_indices(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

FoldPlan stratified_folds(const std::vector<int>& classes, int k, std::uint64_t seed, int repeat_index) {
  if (k < 2) throw PlanError("k must be >= 2");
  if (classes.empty()) throw PlanError("no samples to split");
  const int class_count = *std::max_element(classes.begin(), classes.end()) + 1;
  if (*std::min_element(classes.begin(), classes.end()) < 0) throw PlanError("class indices must be >= 0");

  FoldPlan plan{k, std::vector<int>(classes.size(), -1), repeat_index, seed};
  Rng rng(seed);
  std::size_t offset = 0;
  for (int c = 0; c < class_count; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] == c) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(k)) {
      throw PlanError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " samples, fewer than k = " + std::to_string(k));
    }
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    for (std::size_t i = 0; i < members.size(); ++i) {
      plan.assignments[members[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
    }
    offset += members.size();
  }
  return plan;
}

Trainer khelm_trainer(const elmkit::KhElmConfig& config) {
  return [config](const elmkit::LabeledDataset& data, std::uint64_t seed) -> Classifier {
    auto model = std::make_shared<elmkit::KhElmModel>(elmkit::train_khelm(data, config, seed));
    return [model](const Eigen::MatrixXd& x) { return elmkit::predict_khelm(*model, x).labels; };
  };
}

Trainer kelm_trainer(const elmkit::KernelSpec& kernel, double rho) {
  return [kernel, rho](const elmkit::LabeledDataset& data, std::uint64_t) -> Classifier {
    auto model = std::make_shared<elmkit::KelmModel>(elmkit::train_kelm(data, kernel, rho));
    return [model](const Eigen::MatrixXd& x) { return elmkit::predict_kelm(*model, x).labels; };
  };
}

double EvalReport::mean_accuracy() const { return class_average.size() ? class_average.mean() : 0.0; }

std::vector<double> per_class_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted,
                                       int class_count) {
  if (truth.size() != predicted.size()) throw DimensionError("prediction count differs from truth count");
  std::vector<double> hits(static_cast<std::size_t>(class_count), 0.0);
  std::vector<double> totals(static_cast<std::size_t>(class_count), 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i]);
    totals[c] += 1.0;
    if (predicted[i] == truth[i]) hits[c] += 1.0;
  }
  for (std::size_t c = 0; c < hits.size(); ++c) hits[c] = totals[c] > 0.0 ? hits[c] / totals[c] : 0.0;
  return hits;
}

EvalReport cross_validate(const elmkit::LabeledDataset& data, const Trainer& trainer, const CvOptions& options,
                          std::uint64_t seed, std::string label, nlohmann::json config) {
  if (options.repeats < 1) throw ConfigError("repeats must be >= 1");
  const auto classes = data.classes();
  std::vector<FoldPlan> plans;
  for (int r = 0; r < options.repeats; ++r) {
    plans.push_back(stratified_folds(classes, options.k, derive_seed(seed, {static_cast<std::uint64_t>(r)}), r));
  }

  const auto k = static_cast<std::size_t>(options.k);
  std::vector<FoldResult> cells(plans.size() * k);
  parallel_for(cells.size(), options.jobs, [&](std::size_t task) {
    const int r = static_cast<int>(task / k);
    const int f = static_cast<int>(task % k);
    const auto& plan = plans[static_cast<std::size_t>(r)];
    const std::string where = "repeat " + std::to_string(r) + ", fold " + std::to_string(f) + ": ";
    try {
      const auto train = data.subset(plan.train_indices(f));
      const auto test = data.subset(plan.test_indices(f));
      const auto classify = trainer(train, derive_seed(seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f)}));
      cells[task] = FoldResult{r, f, per_class_accuracy(test.classes(), classify(test.features), data.class_count)};
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what(), e.block_first(), e.block_last(), e.iteration());
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  });

  EvalReport report;
  report.label = std::move(label);
  report.k = options.k;
  report.repeats = options.repeats;
  report.class_count = data.class_count;
  report.seed = seed;
  report.config = std::move(config);
  report.fold_accuracy = Eigen::MatrixXd::Zero(options.k, data.class_count);
  for (const auto& cell : cells) {
    for (int c = 0; c < data.class_count; ++c) {
      report.fold_accuracy(cell.fold, c) += cell.class_accuracy[static_cast<std::size_t>(c)];
    }
  }
  report.fold_accuracy /= static_cast<double>(options.repeats);
  report.class_average = report.fold_accuracy.colwise().mean().transpose();
  report.cells = std::move(cells);
  return report;
}

bccpm::NiwPrior make_prior(const RoiTimeSeries& series, const PriorOverrides& overrides) {
  auto prior = bccpm::NiwPrior::default_for(series);
  if (overrides.kappa0) prior.kappa0 = *overrides.kappa0;
  if (overrides.nu0) prior.nu0 = *overrides.nu0;
  if (overrides.lambda_scale) {
    prior.lambda0 = *overrides.lambda_scale * Eigen::MatrixXd::Identity(series.roi_count(), series.roi_count());
  }
  prior.validate();
  return prior;
}

bccpm::McmcConfig make_mcmc(const PipelineConfig& config, Eigen::Index roi_count, std::uint64_t seed) {
  auto mcmc = bccpm::McmcConfig::default_for(roi_count);
  mcmc.burn_in = config.burn_in;
  mcmc.samples = config.samples;
  if (config.min_block_length) mcmc.min_block_length = *config.min_block_length;
  mcmc.seed = seed;
  mcmc.validate();
  return mcmc;
}

ExtractedFeatures extract_features(const Cohort& cohort, const PipelineConfig& config, bool use_bccpm,
                                   std::uint64_t seed, int jobs) {
  const auto n = cohort.subjects.size();
  if (n == 0) throw ConfigError("cohort is empty");
  if (cohort.labels.size() != n) throw DimensionError("cohort labels and subjects differ in count");

  std::vector<Eigen::VectorXd> rows(n);
  std::vector<std::optional<ChangePointMask>> masks(n);
  std::vector<std::optional<bccpm::PosteriorSummary>> posteriors(n);
  parallel_for(n, jobs, [&](std::size_t s) {
    const std::string where = "subject " + std::to_string(s) + ": ";
    try {
      const auto series = standardize(cohort.subjects[s]);
      if (use_bccpm) {
        const auto prior = make_prior(series, config.prior);
        const auto mcmc = make_mcmc(config, series.roi_count(), derive_seed(seed, {s}));
        posteriors[s] = bccpm::sample_posterior(series, prior, mcmc);
        masks[s] = posteriors[s]->map_mask;
      } else {
        masks[s] = ChangePointMask(static_cast<std::size_t>(series.length()));
      }
      rows[s] = lbem::features_for_sample(series, *masks[s], config.lbem);
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what(), e.block_first(), e.block_last(), e.iteration());
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  });

  const auto d = rows.front().size();
  Eigen::MatrixXd features(static_cast<Eigen::Index>(n), d);
  std::vector<int> classes;
  ExtractedFeatures out;
  for (std::size_t s = 0; s < n; ++s) {
    if (rows[s].size() != d) throw DimensionError("subjects produce features of different lengths");
    features.row(static_cast<Eigen::Index>(s)) = rows[s].transpose();
    classes.push_back(class_of_label(cohort.labels[s]));
    out.masks.push_back(*masks[s]);
    if (posteriors[s]) out.posteriors.push_back(*posteriors[s]);
  }
  out.data = elmkit::LabeledDataset::from_classes(std::move(features), classes, 2);
  return out;
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::bccpm_ablation: return "bccpm-ablation";
    case Experiment::kernel_compare: return "kernel-compare";
    case Experiment::depth_sweep: return "depth-sweep";
  }
  return "";
}

Experiment experiment_from_string(const std::string& name) {
  if (name == "bccpm-ablation") return Experiment::bccpm_ablation;
  if (name == "kernel-compare") return Experiment::kernel_compare;
  if (name == "depth-sweep") return Experiment::depth_sweep;
  throw ConfigError("unknown experiment '" + name + "'");
}

nlohmann::json model_config_json(const elmkit::KhElmConfig& config) {
  nlohmann::json kernel{{"kind", elmkit::to_string(config.kernel.kind)}};
  kernel["sigma"] = config.kernel.sigma ? nlohmann::json(*config.kernel.sigma) : nlohmann::json(nullptr);
  return {{"layer_sizes", config.layer_sizes},
          {"kernel", kernel},
          {"rho", config.rho},
          {"activation", elmkit::to_string(config.activation)},
          {"fista",
           {{"iterations", config.fista.iterations},
            {"l1_weight", config.fista.l1_weight},
            {"lipschitz_boost", config.fista.lipschitz_boost}}}};
}

namespace {

EvalReport run_variant(const elmkit::LabeledDataset& data, const elmkit::KhElmConfig& model,
                       const PipelineConfig& config, Experiment experiment, bool bccpm_on, std::uint64_t seed,
                       const std::string& label) {
  nlohmann::json echo{{"experiment", to_string(experiment)},
                      {"variant", label},
                      {"bccpm", bccpm_on},
                      {"model", model_config_json(model)},
                      {"k", config.cv.k},
                      {"repeats", config.cv.repeats}};
  return cross_validate(data, khelm_trainer(model), config.cv, seed, label, std::move(echo));
}

}  // namespace

std::vector<EvalReport> run_comparison(const ExtractedFeatures& with_bccpm,
                                       const std::optional<ExtractedFeatures>& without_bccpm, Experiment experiment,
                                       const PipelineConfig& config, std::uint64_t seed) {
  std::vector<EvalReport> reports;
  switch (experiment) {
    case Experiment::bccpm_ablation:
      if (!without_bccpm) throw ConfigError("bccpm-ablation needs single-block features");
      reports.push_back(run_variant(with_bccpm.data, config.model, config, experiment, true, seed, "bccpm=on"));
      reports.push_back(run_variant(without_bccpm->data, config.model, config, experiment, false, seed, "bccpm=off"));
      break;
    case Experiment::kernel_compare:
      for (auto kind : {elmkit::KernelKind::rbf, elmkit::KernelKind::linear}) {
        auto model = config.model;
        model.kernel.kind = kind;
        reports.push_back(
            run_variant(with_bccpm.data, model, config, experiment, true, seed, "kernel=" + elmkit::to_string(kind)));
      }
      break;
    case Experiment::depth_sweep: {
      if (config.model.layer_sizes.empty()) throw ConfigError("depth-sweep needs a layer size");
      for (int depth = 1; depth <= 6; ++depth) {
        auto model = config.model;
        model.layer_sizes.assign(static_cast<std::size_t>(depth), config.model.layer_sizes.front());
        reports.push_back(
            run_variant(with_bccpm.data, model, config, experiment, true, seed, "layers=" + std::to_string(depth)));
      }
      break;
    }
  }
  return reports;
}

std::vector<EvalReport> run_comparison(const Cohort& cohort, Experiment experiment, const PipelineConfig& config,
                                       std::uint64_t seed) {
  const auto with = extract_features(cohort, config, true, seed, config.cv.jobs);
  std::optional<ExtractedFeatures> without;
  if (experiment == Experiment::bccpm_ablation) without = extract_features(cohort, config, false, seed, config.cv.jobs);
  return run_comparison(with, without, experiment, config, seed);
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  out << (report.label.empty() ? std::string("report") : report.label) << "  (" << report.k << "-fold, "
      << report.repeats << " repeats, seed " << report.seed << ")\n";
  out << std::left << std::setw(10) << "Fold";
  for (int c = 0; c < report.class_count; ++c) {
    std::ostringstream head;
    head << "class" << c << " (" << (label_of_class(c) > 0 ? "+1" : "-1") << ")";
    out << std::setw(14) << head.str();
  }
  out << '\n' << std::fixed;
  for (Eigen::Index f = 0; f < report.fold_accuracy.rows(); ++f) {
    out << std::setw(10) << ("Fold" + std::to_string(f + 1));
    for (Eigen::Index c = 0; c < report.fold_accuracy.cols(); ++c) {
      out << std::setw(14) << std::setprecision(4) << report.fold_accuracy(f, c);
    }
    out << '\n';
  }
  out << std::setw(10) << "Average";
  for (Eigen::Index c = 0; c < report.class_average.size(); ++c) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << 100.0 * report.class_average(c) << '%';
    out << std::setw(14) << cell.str();
  }
  out << '\n';
  return out.str();
}

}  // namespace khelm::evalharness
