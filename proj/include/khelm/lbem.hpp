#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "khelm/change_point_mask.hpp"
#include "khelm/timeseries.hpp"

namespace khelm::lbem {

inline constexpr int kGroupBits = 6;
inline constexpr int kCodeCount = 64;

/// Order-comparison bits of one column, length 2(m-1).
struct BinaryCode {
  std::vector<std::uint8_t> bits;
};

/// g x T_b codes in [0, 63].
struct GroupCodeMatrix {
  Eigen::MatrixXi codes;
};

/// g x 64 per-group code histograms.
struct LocalBinaryFeature {
  Eigen::MatrixXd histograms;
  bool normalized = false;
};

struct FeatureOptions {
  /// z-score each segment per ROI before encoding. Without it the
  /// length-weighted segment average equals the whole-series histogram.
  bool standardize_segments = true;
};

/// Number of 6-bit groups for m ROIs: ceil(2(m-1) / 6).
int group_count(Eigen::Index roi_count);

/// Bits (L(2), R(2), L(3), R(3), ..., L(m), W) where L(i) = [d_i <= d_{i-1}],
/// R(i) = [d_i <= d_{i+1}] and W = [d_m <= d_1]. Throws DimensionError if m < 2.
BinaryCode encode_binary(const Eigen::Ref<const Eigen::VectorXd>& column);

/// Appends zero bits up to the next multiple of 6.
BinaryCode pad_to_groups(BinaryCode code);

/// Consecutive 6-bit groups, most significant bit first. Throws GroupingError
/// if the length is not a multiple of 6.
std::vector<int> bits_to_decimal(const BinaryCode& code);

/// Throws DimensionError if m < 4.
GroupCodeMatrix encode_series(const RoiTimeSeries& block);

LocalBinaryFeature histogram_features(const GroupCodeMatrix& codes, bool normalized);

/// Flattened (row-major) length-weighted mean of the normalized histograms of
/// each segment; length group_count(m) * 64.
Eigen::VectorXd features_for_sample(const RoiTimeSeries& series, const ChangePointMask& mask,
                                    const FeatureOptions& options = {});

}  // namespace khelm::lbem
