#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "khelm/bccpm.hpp"
#include "khelm/change_point_mask.hpp"
#include "khelm/elmkit.hpp"
#include "khelm/evalharness.hpp"
#include "khelm/timeseries.hpp"

namespace khelm::io {

using nlohmann::json;

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

/// 16 hex digits of FNV-1a over the compact dump (keys are sorted).
std::string config_hash(const json& config);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

json mask_to_json(const ChangePointMask& mask);
ChangePointMask mask_from_json(const json& j);

json ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const json& j);

json cohort_spec_to_json(const SyntheticCohortSpec& spec);
/// Rejects unknown keys; missing optional keys keep their defaults.
SyntheticCohortSpec cohort_spec_from_json(const json& j);

json posterior_to_json(const bccpm::PosteriorSummary& summary);

json model_to_json(const elmkit::KhElmModel& model);
elmkit::KhElmModel model_from_json(const json& j);

json report_to_json(const evalharness::EvalReport& report);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

struct FeatureTable {
  std::vector<int> labels;
  Eigen::MatrixXd features;
};

/// One row per sample: integer label then the feature values.
void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace khelm::io
