#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "khelm/change_point_mask.hpp"

namespace khelm {

enum class Orientation { rois_as_rows, rois_as_columns };

/// m x T matrix of region signals; column t is the observation at time t+1.
/// Blocks cut from a series may have a single column; whole series loaded or
/// generated by this module always have T >= 2.
class RoiTimeSeries {
 public:
  explicit RoiTimeSeries(Eigen::MatrixXd values);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::Index roi_count() const noexcept { return values_.rows(); }
  Eigen::Index length() const noexcept { return values_.cols(); }

  /// Columns [begin, end), 0-based.
  RoiTimeSeries slice(Eigen::Index begin, Eigen::Index end) const;

  friend bool operator==(const RoiTimeSeries& a, const RoiTimeSeries& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  Eigen::MatrixXd values_;
};

/// Comma-separated decimals. Blank lines and lines starting with # are skipped;
/// a first row with any non-numeric cell is a header.
RoiTimeSeries load_series(const std::filesystem::path& path,
                          Orientation orientation = Orientation::rois_as_rows);

/// Writes rois-as-rows CSV with shortest round-trip decimal formatting.
void save_series(const std::filesystem::path& path, const RoiTimeSeries& series);

/// Per-ROI z-score with the sample (n-1) standard deviation. Zero-variance rows
/// become zeros.
RoiTimeSeries standardize(const RoiTimeSeries& series);

struct SyntheticCohortSpec {
  int subjects_per_class = 10;
  int roi_count = 5;
  int length = 200;
  /// 1-based change times (time 1 implied), strictly increasing, in [2, T].
  std::vector<int> change_points_class_a;
  std::vector<int> change_points_class_b;
  double mean_shift = 2.0;
  double covariance_perturbation = 0.0;
  double noise_scale = 1.0;
  /// Base correlation between ROIs i and j is rho^|i-j|; must lie in (-1, 1).
  double spatial_correlation = 0.0;

  /// Throws SpecError naming the offending field.
  void validate() const;
};

/// Per-subject true masks and labels. Class a is labelled -1, class b +1.
struct GroundTruth {
  std::vector<ChangePointMask> masks;
  std::vector<int> labels;
};

struct SyntheticCohort {
  std::vector<RoiTimeSeries> subjects;
  GroundTruth truth;
};

/// Piecewise-stationary Gaussian subjects: first `subjects_per_class` of class a,
/// then class b. At each change point the mean moves by `mean_shift` along a
/// uniformly random direction and the covariance S becomes
/// (1-c)S + c R S R^T for a Haar-random rotation R. Subject s draws from the
/// stream derive_seed(seed, {s}), so `jobs` does not affect the result.
SyntheticCohort generate_synthetic(const SyntheticCohortSpec& spec, std::uint64_t seed, int jobs = 1);

}  // namespace khelm
