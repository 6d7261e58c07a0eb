#include "khelm/serialization.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "khelm/error.hpp"

namespace khelm::io {

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, ptr);
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

template <class T>
T get_field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

json mask_to_json(const ChangePointMask& mask) {
  return {{"T", mask.length()}, {"change_points", mask.change_points()}};
}

ChangePointMask mask_from_json(const json& j) {
  const auto length = get_field<std::size_t>(j, "T");
  const auto points = get_field<std::vector<int>>(j, "change_points");
  return ChangePointMask::from_change_points(length, points);
}

json ground_truth_to_json(const GroundTruth& truth) {
  json subjects = json::array();
  std::size_t length = truth.masks.empty() ? 0 : truth.masks.front().length();
  for (std::size_t s = 0; s < truth.masks.size(); ++s) {
    subjects.push_back({{"label", truth.labels[s]}, {"change_points", truth.masks[s].change_points()}});
  }
  return {{"subjects", subjects}, {"T", length}};
}

GroundTruth ground_truth_from_json(const json& j) {
  const auto length = get_field<std::size_t>(j, "T");
  GroundTruth truth;
  for (const auto& subject : get_field<json>(j, "subjects")) {
    const int label = get_field<int>(subject, "label");
    if (label != 1 && label != -1) throw ConfigError("ground-truth labels must be -1 or +1");
    truth.labels.push_back(label);
    truth.masks.push_back(ChangePointMask::from_change_points(length, get_field<std::vector<int>>(subject, "change_points")));
  }
  return truth;
}

json cohort_spec_to_json(const SyntheticCohortSpec& spec) {
  return {{"subjects_per_class", spec.subjects_per_class},
          {"roi_count", spec.roi_count},
          {"length", spec.length},
          {"change_points_class_a", spec.change_points_class_a},
          {"change_points_class_b", spec.change_points_class_b},
          {"mean_shift", spec.mean_shift},
          {"covariance_perturbation", spec.covariance_perturbation},
          {"noise_scale", spec.noise_scale},
          {"spatial_correlation", spec.spatial_correlation}};
}

SyntheticCohortSpec cohort_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"subjects_per_class", "roi_count", "length", "change_points_class_a", "change_points_class_b",
                  "mean_shift", "covariance_perturbation", "noise_scale", "spatial_correlation"},
                 "cohort spec");
  SyntheticCohortSpec spec;
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const json::exception&) {
      throw SpecError(std::string("field '") + key + "' has the wrong type");
    }
  };
  read("subjects_per_class", spec.subjects_per_class);
  read("roi_count", spec.roi_count);
  read("length", spec.length);
  read("change_points_class_a", spec.change_points_class_a);
  read("change_points_class_b", spec.change_points_class_b);
  read("mean_shift", spec.mean_shift);
  read("covariance_perturbation", spec.covariance_perturbation);
  read("noise_scale", spec.noise_scale);
  read("spatial_correlation", spec.spatial_correlation);
  spec.validate();
  return spec;
}

json posterior_to_json(const bccpm::PosteriorSummary& summary) {
  json out = mask_to_json(summary.map_mask);
  out["marginal_probability"] = summary.marginal_probability;
  out["map_log_posterior"] = summary.map_log_posterior;
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json model_to_json(const elmkit::KhElmModel& model) {
  json layers = json::array();
  for (const auto& layer : model.layers) {
    layers.push_back({{"beta", matrix_to_json(layer.beta)}, {"activation", elmkit::to_string(layer.activation)}});
  }
  json kernel{{"kind", elmkit::to_string(model.head.kernel.kind)}};
  if (model.head.kernel.sigma) kernel["sigma"] = *model.head.kernel.sigma;
  return {{"format_version", 1},
          {"scaling", {{"min", vector_to_json(model.scaling.min)}, {"max", vector_to_json(model.scaling.max)}}},
          {"layers", layers},
          {"head",
           {{"kernel", kernel},
            {"rho", model.head.rho},
            {"alpha", matrix_to_json(model.head.alpha)},
            {"training_features", matrix_to_json(model.head.training_features)}}}};
}

elmkit::KhElmModel model_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw ConfigError("unsupported model format_version");
    elmkit::KhElmModel model;
    model.scaling.min = vector_from_json(j.at("scaling").at("min"));
    model.scaling.max = vector_from_json(j.at("scaling").at("max"));
    for (const auto& layer : j.at("layers")) {
      model.layers.push_back({matrix_from_json(layer.at("beta")),
                              elmkit::activation_from_string(layer.at("activation").get<std::string>())});
    }
    const auto& head = j.at("head");
    model.head.kernel.kind = elmkit::kernel_kind_from_string(head.at("kernel").at("kind").get<std::string>());
    if (head.at("kernel").contains("sigma")) model.head.kernel.sigma = head.at("kernel").at("sigma").get<double>();
    model.head.rho = head.at("rho").get<double>();
    model.head.alpha = matrix_from_json(head.at("alpha"));
    model.head.training_features = matrix_from_json(head.at("training_features"));
    return model;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

json report_to_json(const evalharness::EvalReport& report) {
  json cells = json::array();
  for (const auto& cell : report.cells) {
    cells.push_back({{"repeat", cell.repeat}, {"fold", cell.fold}, {"class_accuracy", cell.class_accuracy}});
  }
  return {{"label", report.label},
          {"k", report.k},
          {"repeats", report.repeats},
          {"class_count", report.class_count},
          {"seed", report.seed},
          {"config", report.config},
          {"fold_accuracy", matrix_to_json(report.fold_accuracy)},
          {"class_average", vector_to_json(report.class_average)},
          {"mean_accuracy", report.mean_accuracy()},
          {"cells", cells}};
}

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table) {
  if (static_cast<Eigen::Index>(table.labels.size()) != table.features.rows()) {
    throw DimensionError("feature table labels and rows differ in count");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < table.features.rows(); ++i) {
    out << table.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < table.features.cols(); ++j) out << ',' << format_double(table.features(i, j));
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  // Same cell rules as series files; the first column is the label.
  const auto series = load_series(path, Orientation::rois_as_rows);
  const auto& v = series.values();
  FeatureTable table;
  table.features = v.rightCols(v.cols() - 1);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double label = v(i, 0);
    if (label != std::round(label)) throw FormatError(static_cast<std::size_t>(i + 1), "label is not an integer");
    table.labels.push_back(static_cast<int>(label));
  }
  return table;
}

}  // namespace khelm::io
