#include "khelm/change_point_mask.hpp"

#include <string>

#include "khelm/error.hpp"

namespace khelm {

ChangePointMask::ChangePointMask(std::size_t length) : bits_(length, 0) {
  if (length == 0) throw DimensionError("change-point mask needs length >= 1");
  bits_[0] = 1;
}

ChangePointMask ChangePointMask::from_bits(std::vector<std::uint8_t> bits) {
  if (bits.empty()) throw DimensionError("change-point mask needs length >= 1");
  if (bits[0] != 1) throw ConfigError("change-point mask must have L_1 = 1");
  for (auto& b : bits) {
    if (b > 1) throw ConfigError("change-point mask bits must be 0 or 1");
  }
  ChangePointMask mask;
  mask.bits_ = std::move(bits);
  return mask;
}

ChangePointMask ChangePointMask::from_change_points(std::size_t length, std::span<const int> one_based) {
  ChangePointMask mask(length);
  int previous = 0;
  for (int t : one_based) {
    if (t < 1 || static_cast<std::size_t>(t) > length) {
      throw ConfigError("change point " + std::to_string(t) + " outside [1, " + std::to_string(length) + "]");
    }
    if (t <= previous) throw ConfigError("change points must be strictly increasing");
    previous = t;
    mask.bits_[static_cast<std::size_t>(t - 1)] = 1;
  }
  return mask;
}

void ChangePointMask::set(std::size_t t, bool value) {
  if (t == 0 && !value) throw ConfigError("L_1 cannot be cleared");
  bits_.at(t) = value ? 1 : 0;
}

std::vector<int> ChangePointMask::change_points() const {
  std::vector<int> out;
  for (std::size_t t = 0; t < bits_.size(); ++t) {
    if (bits_[t]) out.push_back(static_cast<int>(t + 1));
  }
  return out;
}

std::size_t ChangePointMask::segment_count() const {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> ChangePointMask::segments() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t t = 1; t < bits_.size(); ++t) {
    if (bits_[t]) {
      out.emplace_back(begin, t);
      begin = t;
    }
  }
  out.emplace_back(begin, bits_.size());
  return out;
}

}  // namespace khelm
