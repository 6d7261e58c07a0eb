#include "khelm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "khelm/config.hpp"
#include "khelm/error.hpp"
#include "khelm/evalharness.hpp"
#include "khelm/lbem.hpp"
#include "khelm/rng.hpp"
#include "khelm/serialization.hpp"

namespace khelm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string config;
  std::string orientation;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  flags.seed_opt = sub->add_option("--seed", flags.seed, "Random seed (overrides the config)");
  flags.jobs_opt = sub->add_option("--jobs", flags.jobs, "Worker threads (overrides the config)");
  sub->add_option("--config", flags.config, "JSON run config")->check(CLI::ExistingFile);
  sub->add_option("--orientation", flags.orientation, "Series CSV layout")->check(CLI::IsMember({"rows", "cols"}));
}

RunConfig resolve(const CommonFlags& flags) {
  RunConfig config = flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
  if (flags.seed_opt->count()) config.seed = flags.seed;
  if (flags.jobs_opt->count()) config.jobs = flags.jobs;
  if (!flags.orientation.empty()) config.orientation = orientation_from_string(flags.orientation);
  config.pipeline.cv.jobs = config.jobs;
  config.validate();
  return config;
}

void stamp(json& j, const RunConfig& config) {
  const auto echo = config.echo();
  j["seed"] = config.seed;
  j["config_hash"] = io::config_hash(echo);
  j["config"] = echo;
}

std::string stamp_line(const RunConfig& config) {
  return "# seed=" + std::to_string(config.seed) + " config_hash=" + io::config_hash(config.echo()) + "\n";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw Error("input file not found: " + path.string());
}

void write_stamped_csv(const fs::path& path, const RunConfig& config, const std::function<void(const fs::path&)>& writer) {
  const auto tmp = fs::path(path.string() + ".tmp");
  writer(tmp);
  std::ifstream in(tmp);
  std::ostringstream body;
  body << in.rdbuf();
  in.close();
  fs::remove(tmp);
  io::write_text(path, stamp_line(config) + body.str());
}

std::string subject_file(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "subject_%03zu.csv", s);
  return buf;
}

std::string file_label(std::string label) {
  for (char& c : label) {
    if (c == '=') c = '-';
  }
  return label;
}

class Progress {
 public:
  Progress(std::ostream& err, std::string stage) : err_(err), stage_(std::move(stage)), start_(clock::now()) {
    err_ << "[" << stage_ << "] started\n";
  }
  void note(const std::string& what) { err_ << "[" << stage_ << "] " << what << "\n"; }
  ~Progress() {
    const double secs = std::chrono::duration<double>(clock::now() - start_).count();
    err_ << "[" << stage_ << "] done in " << secs << " s\n";
  }

 private:
  using clock = std::chrono::steady_clock;
  std::ostream& err_;
  std::string stage_;
  clock::time_point start_;
};

evalharness::Cohort load_manifest(const fs::path& path, Orientation orientation) {
  require_file(path);
  const auto j = io::read_json(path);
  const auto truth = io::ground_truth_from_json(j);
  evalharness::Cohort cohort;
  const auto& subjects = j.at("subjects");
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    if (!subjects[s].contains("file")) throw ConfigError("manifest subject " + std::to_string(s) + " has no file");
    fs::path file = subjects[s].at("file").get<std::string>();
    if (file.is_relative()) file = path.parent_path() / file;
    require_file(file);
    cohort.subjects.push_back(load_series(file, orientation));
    cohort.labels.push_back(truth.labels[s]);
  }
  return cohort;
}

json write_cohort(const fs::path& dir, const SyntheticCohort& cohort, const RunConfig& config) {
  ensure_dir(dir);
  json manifest = io::ground_truth_to_json(cohort.truth);
  for (std::size_t s = 0; s < cohort.subjects.size(); ++s) {
    const auto name = subject_file(s);
    write_stamped_csv(dir / name, config, [&](const fs::path& p) { save_series(p, cohort.subjects[s]); });
    manifest["subjects"][s]["file"] = name;
  }
  stamp(manifest, config);
  io::write_json(dir / "cohort.json", manifest);
  return manifest;
}

std::uint64_t cohort_seed(std::uint64_t seed) { return derive_seed(seed, {0}); }

elmkit::LabeledDataset dataset_from_table(const io::FeatureTable& table) {
  std::vector<int> classes;
  for (int label : table.labels) classes.push_back(evalharness::class_of_label(label));
  return elmkit::LabeledDataset::from_classes(table.features, classes, 2);
}

void write_reports(const fs::path& dir, const std::vector<evalharness::EvalReport>& reports, const RunConfig& config,
                   std::ostream& out) {
  ensure_dir(dir);
  for (const auto& report : reports) {
    json j = io::report_to_json(report);
    stamp(j, config);
    const auto base = "report_" + file_label(report.label);
    io::write_json(dir / (base + ".json"), j);
    const auto table = evalharness::render_table(report);
    io::write_text(dir / (base + ".txt"), stamp_line(config) + table);
    out << table << "\n";
  }
}

std::vector<evalharness::EvalReport> evaluate(const evalharness::ExtractedFeatures& with,
                                              const std::optional<evalharness::ExtractedFeatures>& without,
                                              const RunConfig& config, const std::string& cv_label) {
  if (config.experiment == "cv") {
    json echo{{"model", evalharness::model_config_json(config.pipeline.model)},
              {"bccpm", config.use_bccpm},
              {"k", config.pipeline.cv.k},
              {"repeats", config.pipeline.cv.repeats}};
    const auto& data = (config.use_bccpm || !without) ? with.data : without->data;
    return {evalharness::cross_validate(data, evalharness::khelm_trainer(config.pipeline.model), config.pipeline.cv,
                                        config.seed, cv_label, echo)};
  }
  return evalharness::run_comparison(with, without, evalharness::experiment_from_string(config.experiment),
                                     config.pipeline, config.seed);
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonFlags& flags, const std::string& spec_path, const std::string& out_dir,
              std::ostream& out, std::ostream& err) {
  auto config = resolve(flags);
  if (!spec_path.empty()) {
    require_file(spec_path);
    config.synthetic = io::cohort_spec_from_json(io::read_json(spec_path));
    config.manifest.reset();
  }
  if (!config.synthetic) throw ConfigError("synth needs --spec or input.synthetic in the config");
  const fs::path dir = out_dir.empty() ? config.output_dir : fs::path(out_dir);
  Progress progress(err, "synth");
  const auto cohort = generate_synthetic(*config.synthetic, cohort_seed(config.seed), config.jobs);
  progress.note(std::to_string(cohort.subjects.size()) + " subjects");
  write_cohort(dir, cohort, config);
  out << (dir / "cohort.json").string() << "\n";
  return kExitOk;
}

int cmd_detect(const CommonFlags& flags, const std::string& series_path, const std::string& out_path,
               std::ostream& out, std::ostream& err) {
  const auto config = resolve(flags);
  require_file(series_path);
  const auto series = standardize(load_series(series_path, config.orientation));
  Progress progress(err, "detect");
  progress.note("m=" + std::to_string(series.roi_count()) + " T=" + std::to_string(series.length()));
  const auto prior = evalharness::make_prior(series, config.pipeline.prior);
  const auto mcmc = evalharness::make_mcmc(config.pipeline, series.roi_count(), config.seed);
  const auto summary = bccpm::sample_posterior(series, prior, mcmc);
  json j = io::posterior_to_json(summary);
  stamp(j, config);
  if (out_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    io::write_json(out_path, j);
  }
  return kExitOk;
}

int cmd_encode(const CommonFlags& flags, const std::string& series_path, const std::string& mask_path,
               const std::string& out_path, int label, std::ostream& out, std::ostream& err) {
  const auto config = resolve(flags);
  require_file(series_path);
  require_file(mask_path);
  const auto series = standardize(load_series(series_path, config.orientation));
  const auto mask = io::mask_from_json(io::read_json(mask_path));
  Progress progress(err, "encode");
  const auto features = lbem::features_for_sample(series, mask, config.pipeline.lbem);
  io::FeatureTable table{{label}, features.transpose()};
  if (out_path.empty()) {
    out << stamp_line(config) << label;
    for (Eigen::Index i = 0; i < features.size(); ++i) out << ',' << io::format_double(features(i));
    out << "\n";
  } else {
    write_stamped_csv(out_path, config, [&](const fs::path& p) { io::write_feature_csv(p, table); });
  }
  progress.note(std::to_string(features.size()) + " feature columns");
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::string& features_path, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  const auto config = resolve(flags);
  require_file(features_path);
  const auto data = dataset_from_table(io::read_feature_csv(features_path));
  Progress progress(err, "train");
  progress.note(std::to_string(data.size()) + " samples");
  const auto model = elmkit::train_khelm(data, config.pipeline.model, config.seed);
  json j = io::model_to_json(model);
  stamp(j, config);
  if (out_path.empty()) {
    out << j.dump() << "\n";
  } else {
    io::write_json(out_path, j);
  }
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& features_path, const std::string& model_path,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto config = resolve(flags);
  require_file(features_path);
  const auto table = io::read_feature_csv(features_path);
  Progress progress(err, "eval");

  if (!model_path.empty()) {
    require_file(model_path);
    const auto model = io::model_from_json(io::read_json(model_path));
    const auto prediction = elmkit::predict_khelm(model, table.features);
    std::vector<int> predicted;
    for (int c : prediction.labels) predicted.push_back(evalharness::label_of_class(c));
    json j{{"predicted", predicted}};
    std::vector<int> truth_classes;
    bool labelled = true;
    for (int label : table.labels) {
      if (label != 1 && label != -1) labelled = false;
    }
    if (labelled) {
      for (int label : table.labels) truth_classes.push_back(evalharness::class_of_label(label));
      j["class_accuracy"] = evalharness::per_class_accuracy(truth_classes, prediction.labels, 2);
    }
    stamp(j, config);
    out << j.dump(2) << "\n";
    return kExitOk;
  }

  if (config.experiment == "bccpm-ablation") {
    throw ConfigError("eval works on a feature table; bccpm-ablation needs the pipeline command");
  }
  const evalharness::ExtractedFeatures features{dataset_from_table(table), {}, {}};
  const auto reports = evaluate(features, std::nullopt, config, "eval");
  write_reports(out_dir.empty() ? config.output_dir : fs::path(out_dir), reports, config, out);
  return kExitOk;
}

int cmd_pipeline(const CommonFlags& flags, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  auto config = resolve(flags);
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (!config.synthetic && !config.manifest) throw ConfigError("pipeline needs input.synthetic or input.manifest");
  const fs::path dir = config.output_dir;
  ensure_dir(dir);

  evalharness::Cohort cohort;
  {
    Progress progress(err, "pipeline:input");
    if (config.synthetic) {
      auto synthetic = generate_synthetic(*config.synthetic, cohort_seed(config.seed), config.jobs);
      write_cohort(dir / "cohort", synthetic, config);
      cohort.subjects = std::move(synthetic.subjects);
      cohort.labels = synthetic.truth.labels;
    } else {
      cohort = load_manifest(*config.manifest, config.orientation);
    }
    progress.note(std::to_string(cohort.subjects.size()) + " subjects");
  }

  const bool need_with = config.use_bccpm || config.experiment != "cv";
  const bool need_without = !config.use_bccpm || config.experiment == "bccpm-ablation";
  std::optional<evalharness::ExtractedFeatures> with;
  std::optional<evalharness::ExtractedFeatures> without;
  try {
    if (need_with) {
      Progress progress(err, "pipeline:detect+encode");
      with = evalharness::extract_features(cohort, config.pipeline, true, config.seed, config.jobs);
    }
    if (need_without) {
      Progress progress(err, "pipeline:encode (single block)");
      without = evalharness::extract_features(cohort, config.pipeline, false, config.seed, config.jobs);
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("detect/encode: ") + e.what(), e.block_first(), e.block_last(), e.iteration());
  }

  const auto& primary = with ? *with : *without;
  json masks{{"T", cohort.subjects.front().length()}, {"subjects", json::array()}};
  for (std::size_t s = 0; s < primary.masks.size(); ++s) {
    masks["subjects"].push_back({{"label", cohort.labels[s]}, {"change_points", primary.masks[s].change_points()}});
  }
  stamp(masks, config);
  io::write_json(dir / "masks.json", masks);
  write_stamped_csv(dir / "features.csv", config, [&](const fs::path& p) {
    io::write_feature_csv(p, {cohort.labels, primary.data.features});
  });

  std::vector<evalharness::EvalReport> reports;
  {
    Progress progress(err, "pipeline:evaluate");
    const auto label = std::string("bccpm=") + (config.use_bccpm ? "on" : "off");
    try {
      reports = evaluate(with ? *with : *without, without, config, label);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("evaluate: ") + e.what(), e.block_first(), e.block_last(), e.iteration());
    }
  }
  write_reports(dir, reports, config, out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"khelm: change-point segmentation, local binary features and kernel hierarchical ELM"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "khelm 0.1.0");

  std::map<std::string, CommonFlags> flags;
  std::string spec_path, out_path, series_path, mask_path, features_path, model_path;
  int label = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  add_common(synth, flags["synth"]);
  synth->add_option("--spec", spec_path, "Cohort spec JSON");
  synth->add_option("--out", out_path, "Output directory");

  auto* detect = app.add_subcommand("detect", "MAP change-point mask of one series");
  add_common(detect, flags["detect"]);
  detect->add_option("series", series_path, "Series CSV")->required();
  detect->add_option("--out", out_path, "Posterior JSON (stdout if omitted)");

  auto* encode = app.add_subcommand("encode", "Local binary features of one segmented series");
  add_common(encode, flags["encode"]);
  encode->add_option("series", series_path, "Series CSV")->required();
  encode->add_option("--mask", mask_path, "Mask or posterior JSON")->required();
  encode->add_option("--out", out_path, "Feature CSV (stdout if omitted)");
  encode->add_option("--label", label, "Label written in the first column");

  auto* train = app.add_subcommand("train", "Train a KH-ELM on a feature table");
  add_common(train, flags["train"]);
  train->add_option("features", features_path, "Feature CSV")->required();
  train->add_option("--out", out_path, "Model JSON (stdout if omitted)");

  auto* eval = app.add_subcommand("eval", "Cross-validate, or score with --model");
  add_common(eval, flags["eval"]);
  eval->add_option("features", features_path, "Feature CSV")->required();
  eval->add_option("--model", model_path, "Trained model JSON");
  eval->add_option("--out", out_path, "Report directory");

  auto* pipeline = app.add_subcommand("pipeline", "Synthesize or load, detect, encode and evaluate");
  add_common(pipeline, flags["pipeline"]);
  pipeline->add_option("--out", out_path, "Output directory (overrides output_dir)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(flags["synth"], spec_path, out_path, out, err);
    if (*detect) return cmd_detect(flags["detect"], series_path, out_path, out, err);
    if (*encode) return cmd_encode(flags["encode"], series_path, mask_path, out_path, label, out, err);
    if (*train) return cmd_train(flags["train"], features_path, out_path, out, err);
    if (*eval) return cmd_eval(flags["eval"], features_path, model_path, out_path, out, err);
    return cmd_pipeline(flags["pipeline"], out_path, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace khelm::cli
