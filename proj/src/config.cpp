#include "khelm/config.hpp"

#include <set>

#include "khelm/error.hpp"
#include "khelm/serialization.hpp"

namespace khelm::cli {

using nlohmann::json;

Orientation orientation_from_string(const std::string& name) {
  if (name == "rows") return Orientation::rois_as_rows;
  if (name == "cols") return Orientation::rois_as_columns;
  throw ConfigError("orientation must be 'rows' or 'cols', got '" + name + "'");
}

std::string to_string(Orientation orientation) {
  return orientation == Orientation::rois_as_rows ? "rows" : "cols";
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& field, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
  }
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& field, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T value{};
  read(j, key, value, where);
  field = value;
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (synthetic && manifest) throw ConfigError("input: give either synthetic or manifest, not both");
  if (synthetic) synthetic->validate();

  const auto& prior = pipeline.prior;
  if (prior.kappa0 && !(*prior.kappa0 > 0.0)) throw ConfigError("prior.kappa0 must be positive");
  if (prior.lambda_scale && !(*prior.lambda_scale > 0.0)) throw ConfigError("prior.lambda_scale must be positive");
  if (prior.nu0 && synthetic && !(*prior.nu0 > static_cast<double>(synthetic->roi_count) - 1.0)) {
    throw ConfigError("prior.nu0 must exceed roi_count - 1");
  }
  if (pipeline.burn_in < 0) throw ConfigError("mcmc.burn_in must be >= 0");
  if (pipeline.samples < 1) throw ConfigError("mcmc.samples must be >= 1");
  if (pipeline.min_block_length) {
    if (*pipeline.min_block_length < 1) throw ConfigError("mcmc.min_block_length must be >= 1");
    if (synthetic && synthetic->length < 2 * static_cast<Eigen::Index>(*pipeline.min_block_length)) {
      throw ConfigError("mcmc.min_block_length too large for synthetic.length");
    }
  }

  const auto& model = pipeline.model;
  if (model.layer_sizes.empty()) throw ConfigError("model.layer_sizes must not be empty");
  for (int size : model.layer_sizes) {
    if (size < 1) throw ConfigError("model.layer_sizes entries must be >= 1");
  }
  if (!(model.rho > 0.0)) throw ConfigError("model.rho must be positive");
  if (model.kernel.sigma && !(*model.kernel.sigma > 0.0)) throw ConfigError("model.kernel.sigma must be positive");
  try {
    model.fista.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.fista: ") + e.what());
  }

  if (pipeline.cv.k < 2) throw ConfigError("eval.k must be >= 2");
  if (pipeline.cv.repeats < 1) throw ConfigError("eval.repeats must be >= 1");
  if (experiment != "cv") {
    try {
      evalharness::experiment_from_string(experiment);
    } catch (const Error&) {
      throw ConfigError("eval.experiment must be cv, bccpm-ablation, kernel-compare or depth-sweep");
    }
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json RunConfig::to_json() const {
  json input = json::object();
  if (synthetic) input["synthetic"] = io::cohort_spec_to_json(*synthetic);
  if (manifest) input["manifest"] = manifest->generic_string();

  json prior = json::object();
  if (pipeline.prior.kappa0) prior["kappa0"] = *pipeline.prior.kappa0;
  if (pipeline.prior.nu0) prior["nu0"] = *pipeline.prior.nu0;
  if (pipeline.prior.lambda_scale) prior["lambda_scale"] = *pipeline.prior.lambda_scale;

  json mcmc{{"burn_in", pipeline.burn_in}, {"samples", pipeline.samples}};
  if (pipeline.min_block_length) mcmc["min_block_length"] = *pipeline.min_block_length;

  return {{"seed", seed},
          {"jobs", jobs},
          {"orientation", to_string(orientation)},
          {"input", input},
          {"prior", prior},
          {"mcmc", mcmc},
          {"lbem", {{"standardize_segments", pipeline.lbem.standardize_segments}}},
          {"model", evalharness::model_config_json(pipeline.model)},
          {"eval",
           {{"k", pipeline.cv.k},
            {"repeats", pipeline.cv.repeats},
            {"experiment", experiment},
            {"use_bccpm", use_bccpm}}},
          {"output_dir", output_dir.generic_string()}};
}

json RunConfig::echo() const {
  auto j = to_json();
  j.erase("jobs");
  j.erase("output_dir");
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"seed", "jobs", "orientation", "input", "prior", "mcmc", "lbem", "model", "eval", "output_dir"}, "");
  RunConfig config;
  read(j, "seed", config.seed, "");
  read(j, "jobs", config.jobs, "");
  if (j.contains("orientation")) {
    std::string name;
    read(j, "orientation", name, "");
    config.orientation = orientation_from_string(name);
  }
  if (j.contains("input")) {
    const auto& input = j.at("input");
    check_keys(input, {"synthetic", "manifest"}, "input");
    if (input.contains("synthetic")) {
      try {
        config.synthetic = io::cohort_spec_from_json(input.at("synthetic"));
      } catch (const Error& e) {
        throw ConfigError(std::string("input.synthetic: ") + e.what());
      }
    }
    if (input.contains("manifest")) {
      std::string path;
      read(input, "manifest", path, "input");
      config.manifest = path;
    }
  }
  auto& pipeline = config.pipeline;
  if (j.contains("prior")) {
    const auto& prior = j.at("prior");
    check_keys(prior, {"kappa0", "nu0", "lambda_scale"}, "prior");
    read_optional(prior, "kappa0", pipeline.prior.kappa0, "prior");
    read_optional(prior, "nu0", pipeline.prior.nu0, "prior");
    read_optional(prior, "lambda_scale", pipeline.prior.lambda_scale, "prior");
  }
  if (j.contains("mcmc")) {
    const auto& mcmc = j.at("mcmc");
    check_keys(mcmc, {"burn_in", "samples", "min_block_length"}, "mcmc");
    read(mcmc, "burn_in", pipeline.burn_in, "mcmc");
    read(mcmc, "samples", pipeline.samples, "mcmc");
    read_optional(mcmc, "min_block_length", pipeline.min_block_length, "mcmc");
  }
  if (j.contains("lbem")) {
    const auto& lbem = j.at("lbem");
    check_keys(lbem, {"standardize_segments"}, "lbem");
    read(lbem, "standardize_segments", pipeline.lbem.standardize_segments, "lbem");
  }
  if (j.contains("model")) {
    const auto& model = j.at("model");
    check_keys(model, {"layer_sizes", "kernel", "rho", "activation", "fista"}, "model");
    read(model, "layer_sizes", pipeline.model.layer_sizes, "model");
    read(model, "rho", pipeline.model.rho, "model");
    if (model.contains("activation")) {
      std::string name;
      read(model, "activation", name, "model");
      try {
        pipeline.model.activation = elmkit::activation_from_string(name);
      } catch (const Error& e) {
        throw ConfigError(std::string("model.activation: ") + e.what());
      }
    }
    if (model.contains("kernel")) {
      const auto& kernel = model.at("kernel");
      check_keys(kernel, {"kind", "sigma"}, "model.kernel");
      if (kernel.contains("kind")) {
        std::string name;
        read(kernel, "kind", name, "model.kernel");
        try {
          pipeline.model.kernel.kind = elmkit::kernel_kind_from_string(name);
        } catch (const Error& e) {
          throw ConfigError(std::string("model.kernel.kind: ") + e.what());
        }
      }
      read_optional(kernel, "sigma", pipeline.model.kernel.sigma, "model.kernel");
    }
    if (model.contains("fista")) {
      const auto& fista = model.at("fista");
      check_keys(fista, {"iterations", "l1_weight", "lipschitz_boost"}, "model.fista");
      read(fista, "iterations", pipeline.model.fista.iterations, "model.fista");
      read(fista, "l1_weight", pipeline.model.fista.l1_weight, "model.fista");
      read(fista, "lipschitz_boost", pipeline.model.fista.lipschitz_boost, "model.fista");
    }
  }
  if (j.contains("eval")) {
    const auto& eval = j.at("eval");
    check_keys(eval, {"k", "repeats", "experiment", "use_bccpm"}, "eval");
    read(eval, "k", pipeline.cv.k, "eval");
    read(eval, "repeats", pipeline.cv.repeats, "eval");
    read(eval, "experiment", config.experiment, "eval");
    read(eval, "use_bccpm", config.use_bccpm, "eval");
  }
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir, "");
    config.output_dir = dir;
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto j = io::read_json(path);
  auto config = RunConfig::from_json(j);
  if (config.manifest && config.manifest->is_relative()) {
    config.manifest = path.parent_path() / *config.manifest;
  }
  return config;
}

}  // namespace khelm::cli
