#include "khelm/lbem.hpp"

#include <string>

#include "khelm/error.hpp"

namespace khelm::lbem {

int group_count(Eigen::Index roi_count) {
  const auto bits = 2 * (roi_count - 1);
  return static_cast<int>((bits + kGroupBits - 1) / kGroupBits);
}

BinaryCode encode_binary(const Eigen::Ref<const Eigen::VectorXd>& column) {
  const auto m = column.size();
  if (m < 2) throw DimensionError("binary encoding needs m >= 2, got " + std::to_string(m));
  BinaryCode code;
  code.bits.reserve(static_cast<std::size_t>(2 * (m - 1)));
  for (Eigen::Index i = 1; i < m; ++i) {
    code.bits.push_back(column(i) <= column(i - 1) ? 1 : 0);
    if (i + 1 < m) {
      code.bits.push_back(column(i) <= column(i + 1) ? 1 : 0);
    } else {
      code.bits.push_back(column(m - 1) <= column(0) ? 1 : 0);
    }
  }
  return code;
}

BinaryCode pad_to_groups(BinaryCode code) {
  while (code.bits.size() % kGroupBits != 0) code.bits.push_back(0);
  return code;
}

std::vector<int> bits_to_decimal(const BinaryCode& code) {
  if (code.bits.size() % kGroupBits != 0) {
    throw GroupingError("code length " + std::to_string(code.bits.size()) + " is not a multiple of 6");
  }
  std::vector<int> out;
  out.reserve(code.bits.size() / kGroupBits);
  for (std::size_t g = 0; g < code.bits.size(); g += kGroupBits) {
    int value = 0;
    for (std::size_t b = 0; b < kGroupBits; ++b) value = 2 * value + code.bits[g + b];
    out.push_back(value);
  }
  return out;
}

GroupCodeMatrix encode_series(const RoiTimeSeries& block) {
  const auto m = block.roi_count();
  if (m < 4) throw DimensionError("encode_series needs m >= 4, got " + std::to_string(m));
  const int g = group_count(m);
  GroupCodeMatrix out{Eigen::MatrixXi(g, block.length())};
  for (Eigen::Index t = 0; t < block.length(); ++t) {
    const auto codes = bits_to_decimal(pad_to_groups(encode_binary(block.values().col(t))));
    for (int r = 0; r < g; ++r) out.codes(r, t) = codes[static_cast<std::size_t>(r)];
  }
  return out;
}

LocalBinaryFeature histogram_features(const GroupCodeMatrix& codes, bool normalized) {
  const auto g = codes.codes.rows();
  const auto n = codes.codes.cols();
  if (g == 0 || n == 0) throw DimensionError("histogram of an empty code matrix");
  LocalBinaryFeature out{Eigen::MatrixXd::Zero(g, kCodeCount), normalized};
  for (Eigen::Index r = 0; r < g; ++r) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const int c = codes.codes(r, t);
      if (c < 0 || c >= kCodeCount) throw GroupingError("code " + std::to_string(c) + " outside [0, 63]");
      out.histograms(r, c) += 1.0;
    }
  }
  if (normalized) out.histograms /= static_cast<double>(n);
  return out;
}

namespace {

/// z-score per ROI; single-column or constant rows become zeros.
RoiTimeSeries standardize_block(const RoiTimeSeries& block) {
  if (block.length() < 2) return RoiTimeSeries(Eigen::MatrixXd::Zero(block.roi_count(), block.length()));
  return standardize(block);
}

}  // namespace

Eigen::VectorXd features_for_sample(const RoiTimeSeries& series, const ChangePointMask& mask,
                                    const FeatureOptions& options) {
  if (static_cast<Eigen::Index>(mask.length()) != series.length()) {
    throw DimensionError("mask length " + std::to_string(mask.length()) + " does not match series length " +
                         std::to_string(series.length()));
  }
  const int g = group_count(series.roi_count());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(g, kCodeCount);
  for (const auto& [begin, end] : mask.segments()) {
    auto block = series.slice(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end));
    if (options.standardize_segments) block = standardize_block(block);
    const auto hist = histogram_features(encode_series(block), true);
    sum += static_cast<double>(end - begin) * hist.histograms;
  }
  sum /= static_cast<double>(series.length());

  Eigen::VectorXd flat(sum.size());
  for (Eigen::Index r = 0; r < g; ++r) flat.segment(r * kCodeCount, kCodeCount) = sum.row(r).transpose();
  return flat;
}

}  // namespace khelm::lbem
