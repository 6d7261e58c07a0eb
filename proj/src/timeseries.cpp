#include "khelm/timeseries.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "khelm/error.hpp"
#include "khelm/parallel.hpp"
#include "khelm/rng.hpp"
#include "khelm/serialization.hpp"

namespace khelm {

RoiTimeSeries::RoiTimeSeries(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DimensionError("time series needs at least one ROI and one time point");
  }
  if (!values_.allFinite()) throw NumericalError("time series contains non-finite values");
}

RoiTimeSeries RoiTimeSeries::slice(Eigen::Index begin, Eigen::Index end) const {
  if (begin < 0 || end > length() || begin >= end) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range");
  }
  return RoiTimeSeries(values_.middleCols(begin, end - begin));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_finite(std::string_view cell, double& value) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(value);
}

}  // namespace

RoiTimeSeries load_series(const std::filesystem::path& path, Orientation orientation) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open series file " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto cells = split_cells(line);
    std::vector<double> row(cells.size());
    bool all_numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) all_numeric = all_numeric && parse_finite(cells[c], row[c]);

    if (first_content_row) {
      first_content_row = false;
      if (!all_numeric) continue;  // header
    }
    if (!all_numeric) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        double v;
        if (!parse_finite(cells[c], v)) throw ParseError(line_no, c + 1, std::string(cells[c]));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(line_no, "expected " + std::to_string(rows.front().size()) + " columns, found " +
                                     std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInputError("no numeric rows in " + path.string());

  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd values(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  if (orientation == Orientation::rois_as_columns) values.transposeInPlace();
  if (values.cols() < 2) throw DimensionError("series " + path.string() + " has fewer than 2 time points");
  return RoiTimeSeries(std::move(values));
}

void save_series(const std::filesystem::path& path, const RoiTimeSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write series file " + path.string());
  const auto& v = series.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (j) out << ',';
      out << io::format_double(v(i, j));
    }
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

RoiTimeSeries standardize(const RoiTimeSeries& series) {
  const auto& v = series.values();
  const auto n = v.cols();
  if (n < 2) throw DimensionError("standardize needs T >= 2");
  Eigen::MatrixXd out(v.rows(), n);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double mean = v.row(i).mean();
    const Eigen::RowVectorXd centered = v.row(i).array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0.0) {
      out.row(i) = centered / sd;
    } else {
      out.row(i).setZero();
    }
  }
  return RoiTimeSeries(std::move(out));
}

void SyntheticCohortSpec::validate() const {
  if (subjects_per_class < 1) throw SpecError("subjects_per_class must be >= 1");
  if (roi_count < 1) throw SpecError("roi_count must be >= 1");
  if (length < 2) throw SpecError("length must be >= 2");
  auto check_points = [&](const std::vector<int>& points, const char* field) {
    int previous = 1;
    for (int t : points) {
      if (t < 2 || t > length) {
        throw SpecError(std::string(field) + ": change point " + std::to_string(t) + " outside [2, " +
                        std::to_string(length) + "]");
      }
      if (t <= previous) throw SpecError(std::string(field) + ": change points must be strictly increasing");
      previous = t;
    }
  };
  check_points(change_points_class_a, "change_points_class_a");
  check_points(change_points_class_b, "change_points_class_b");
  if (!std::isfinite(mean_shift)) throw SpecError("mean_shift must be finite");
  if (!(covariance_perturbation >= 0.0 && covariance_perturbation <= 1.0)) {
    throw SpecError("covariance_perturbation must lie in [0, 1]");
  }
  if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) throw SpecError("noise_scale must be positive");
  if (!(spatial_correlation > -1.0 && spatial_correlation < 1.0)) {
    throw SpecError("spatial_correlation must lie in (-1, 1)");
  }
}

namespace {

Eigen::VectorXd random_unit(Eigen::Index m, Rng& rng) {
  Eigen::VectorXd u(m);
  do {
    for (Eigen::Index i = 0; i < m; ++i) u(i) = rng.normal();
  } while (u.norm() == 0.0);
  return u / u.norm();
}

Eigen::MatrixXd random_rotation(Eigen::Index m, Rng& rng) {
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

RoiTimeSeries generate_subject(const SyntheticCohortSpec& spec, const std::vector<int>& change_points, Rng& rng) {
  const Eigen::Index m = spec.roi_count;
  const Eigen::Index T = spec.length;
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      cov(i, j) = spec.noise_scale * spec.noise_scale *
                  std::pow(spec.spatial_correlation, static_cast<double>(std::abs(i - j)));
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);

  std::vector<Eigen::Index> starts{0};
  for (int t : change_points) starts.push_back(t - 1);
  starts.push_back(T);

  Eigen::MatrixXd values(m, T);
  Eigen::VectorXd eps(m);
  for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
    if (k > 0) {
      mean += spec.mean_shift * random_unit(m, rng);
      const Eigen::MatrixXd rot = random_rotation(m, rng);
      cov = (1.0 - spec.covariance_perturbation) * cov + spec.covariance_perturbation * (rot * cov * rot.transpose());
      cov = 0.5 * (cov + cov.transpose());
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("synthetic covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    for (Eigen::Index t = starts[k]; t < starts[k + 1]; ++t) {
      for (Eigen::Index i = 0; i < m; ++i) eps(i) = rng.normal();
      values.col(t) = mean + chol * eps;
    }
  }
  return RoiTimeSeries(std::move(values));
}

}  // namespace

SyntheticCohort generate_synthetic(const SyntheticCohortSpec& spec, std::uint64_t seed, int jobs) {
  spec.validate();
  const auto n = static_cast<std::size_t>(2 * spec.subjects_per_class);
  std::vector<std::optional<RoiTimeSeries>> subjects(n);
  parallel_for(n, jobs, [&](std::size_t s) {
    const bool class_b = s >= static_cast<std::size_t>(spec.subjects_per_class);
    Rng rng(derive_seed(seed, {s}));
    subjects[s] = generate_subject(spec, class_b ? spec.change_points_class_b : spec.change_points_class_a, rng);
  });

  SyntheticCohort cohort;
  for (std::size_t s = 0; s < n; ++s) {
    const bool class_b = s >= static_cast<std::size_t>(spec.subjects_per_class);
    const auto& points = class_b ? spec.change_points_class_b : spec.change_points_class_a;
    cohort.subjects.push_back(std::move(*subjects[s]));
    cohort.truth.masks.push_back(ChangePointMask::from_change_points(static_cast<std::size_t>(spec.length), points));
    cohort.truth.labels.push_back(class_b ? 1 : -1);
  }
  return cohort;
}

}  // namespace khelm
