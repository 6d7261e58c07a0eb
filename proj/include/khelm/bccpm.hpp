#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "khelm/change_point_mask.hpp"
#include "khelm/timeseries.hpp"

namespace khelm::bccpm {

/// Default kappa0 used by NiwPrior::default_for.
inline constexpr double kDefaultKappa0 = 0.03;

/// Normal-Inverse-Wishart prior: Sigma ~ IW(lambda0, nu0), mu | Sigma ~ N(mu0, Sigma / kappa0).
struct NiwPrior {
  double kappa0 = 1.0;
  double nu0 = 3.0;
  Eigen::MatrixXd lambda0;
  Eigen::VectorXd mu0;

  Eigen::Index dimension() const noexcept { return mu0.size(); }
  /// Throws ConfigError.
  void validate() const;

  /// mu0 = per-ROI mean, kappa0 = kDefaultKappa0, nu0 = m + 2, lambda0 = pooled per-ROI
  /// variance times the identity (1 if the series is constant).
  static NiwPrior default_for(const RoiTimeSeries& series);
};

struct McmcConfig {
  int burn_in = 500;
  int samples = 1500;
  std::uint64_t seed = 0;
  int min_block_length = 2;

  void validate() const;
  /// Defaults with min_block_length = max(2, ceil(m / 4)).
  static McmcConfig default_for(Eigen::Index roi_count);
};

struct PosteriorSummary {
  ChangePointMask map_mask;
  /// Fraction of recorded sweeps with L_t = 1; entry 0 is always 1.
  std::vector<double> marginal_probability;
  double map_log_posterior = 0.0;
};

/// log Gamma_m(a).
double log_multivariate_gamma(int m, double a);

/// Log marginal density of the block's columns under the NIW prior.
/// Throws NumericalError if the posterior scale matrix is not positive definite.
double log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& block, const NiwPrior& prior);
inline double log_marginal_likelihood(const RoiTimeSeries& block, const NiwPrior& prior) {
  return log_marginal_likelihood(block.values(), prior);
}

/// Sum of block log marginals plus (T-1) log 0.5. Unnormalized.
double log_posterior(const ChangePointMask& mask, const RoiTimeSeries& series, const NiwPrior& prior);

/// Called once per recorded sweep with the current state and its log posterior.
using SampleObserver = std::function<void(const ChangePointMask&, double)>;

/// Single-site Gibbs sampler over L_2..L_T. Throws ConfigError when
/// T < 2 * min_block_length.
PosteriorSummary sample_posterior(const RoiTimeSeries& series, const NiwPrior& prior,
                                  const McmcConfig& config, const SampleObserver& observer = {});

std::vector<RoiTimeSeries> extract_segments(const RoiTimeSeries& series, const ChangePointMask& mask);

}  // namespace khelm::bccpm
