#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "khelm/evalharness.hpp"
#include "khelm/timeseries.hpp"

namespace khelm::cli {

/// Everything one reproducible run needs. Parsed from JSON; unknown keys are
/// rejected and every nested invariant is checked before any compute.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  Orientation orientation = Orientation::rois_as_rows;

  /// Exactly one input source for `pipeline`.
  std::optional<SyntheticCohortSpec> synthetic;
  std::optional<std::filesystem::path> manifest;

  evalharness::PipelineConfig pipeline;
  bool use_bccpm = true;
  /// "cv", or one of the comparison experiments.
  std::string experiment = "cv";
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError / SpecError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// to_json without jobs and output_dir; this is what outputs embed and hash.
  nlohmann::json echo() const;
  static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);

/// "rows" or "cols".
Orientation orientation_from_string(const std::string& name);
std::string to_string(Orientation orientation);

}  // namespace khelm::cli
