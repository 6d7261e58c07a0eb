#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace khelm {

/// Mixes a base seed with a path of indices (subject, repeat, fold, ...) into an
/// independent stream seed. SplitMix64 finalizer per component.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Deterministic random stream. The engine output sequence of std::mt19937_64
/// is fixed by the standard; the distributions are implemented here so that
/// draws do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal (Box-Muller; the second variate is cached).
  double normal();

  /// Uniform integer in [0, n). Unbiased (rejection).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace khelm
