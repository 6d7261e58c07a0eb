#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace khelm {

/// Binary change-point indicator over T time points. Bit 0 (time 1) is always
/// set. Positions in the C++ interface are 0-based; `change_points()` returns
/// the 1-based times used in every file format.
class ChangePointMask {
 public:
  /// Single-block mask of the given length (only time 1 set).
  explicit ChangePointMask(std::size_t length);

  static ChangePointMask from_bits(std::vector<std::uint8_t> bits);
  static ChangePointMask from_change_points(std::size_t length, std::span<const int> one_based);

  std::size_t length() const noexcept { return bits_.size(); }
  bool test(std::size_t t) const { return bits_.at(t) != 0; }
  /// Sets or clears bit t (0-based). Bit 0 cannot be cleared.
  void set(std::size_t t, bool value);

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::vector<int> change_points() const;
  std::size_t segment_count() const;
  /// Half-open 0-based column ranges [begin, end) of each block.
  std::vector<std::pair<std::size_t, std::size_t>> segments() const;

  friend bool operator==(const ChangePointMask&, const ChangePointMask&) = default;

 private:
  ChangePointMask() = default;
  std::vector<std::uint8_t> bits_;
};

}  // namespace khelm
