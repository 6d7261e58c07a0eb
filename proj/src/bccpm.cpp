#include "khelm/bccpm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>

#include "khelm/error.hpp"
#include "khelm/rng.hpp"

namespace khelm::bccpm {

void NiwPrior::validate() const {
  const auto m = dimension();
  if (m < 1) throw ConfigError("prior dimension must be >= 1");
  if (lambda0.rows() != m || lambda0.cols() != m) throw ConfigError("lambda0 must be m x m");
  if (!(kappa0 > 0.0)) throw ConfigError("kappa0 must be positive");
  if (!(nu0 > static_cast<double>(m) - 1.0)) throw ConfigError("nu0 must exceed m - 1");
  if (!lambda0.allFinite() || !mu0.allFinite()) throw ConfigError("prior contains non-finite values");
  if ((lambda0 - lambda0.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw ConfigError("lambda0 must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(lambda0).info() != Eigen::Success) {
    throw ConfigError("lambda0 must be positive definite");
  }
}

NiwPrior NiwPrior::default_for(const RoiTimeSeries& series) {
  const auto& v = series.values();
  const auto m = v.rows();
  const auto n = v.cols();
  NiwPrior prior;
  prior.mu0 = v.rowwise().mean();
  double pooled = 0.0;
  if (n > 1) {
    pooled = ((v.colwise() - prior.mu0).rowwise().squaredNorm() / static_cast<double>(n - 1)).mean();
  }
  if (!(pooled > 0.0)) pooled = 1.0;
  prior.kappa0 = kDefaultKappa0;
  prior.nu0 = static_cast<double>(m) + 2.0;
  prior.lambda0 = pooled * Eigen::MatrixXd::Identity(m, m);
  return prior;
}

void McmcConfig::validate() const {
  if (burn_in < 0) throw ConfigError("mcmc.burn_in must be >= 0");
  if (samples < 1) throw ConfigError("mcmc.samples must be >= 1");
  if (min_block_length < 1) throw ConfigError("mcmc.min_block_length must be >= 1");
}

McmcConfig McmcConfig::default_for(Eigen::Index roi_count) {
  McmcConfig config;
  config.min_block_length = std::max<int>(2, static_cast<int>((roi_count + 3) / 4));
  return config;
}

double log_multivariate_gamma(int m, double a) {
  double out = 0.25 * m * (m - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= m; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

namespace {

/// Prior terms that do not depend on the block.
struct PreparedPrior {
  const NiwPrior& prior;
  double log_det_lambda0;
  double log_gamma_nu0;

  explicit PreparedPrior(const NiwPrior& p) : prior(p) {
    p.validate();
    const Eigen::LLT<Eigen::MatrixXd> llt(p.lambda0);
    log_det_lambda0 = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    log_gamma_nu0 = log_multivariate_gamma(static_cast<int>(p.dimension()), 0.5 * p.nu0);
  }

  /// Throws a bare NumericalError; callers attach the block extent.
  double score(const Eigen::Ref<const Eigen::MatrixXd>& block) const {
    const auto m = block.rows();
    const double n = static_cast<double>(block.cols());
    const Eigen::VectorXd mean = block.rowwise().mean();
    const Eigen::MatrixXd centered = block.colwise() - mean;
    const Eigen::VectorXd shift = mean - prior.mu0;
    const double kappa_n = prior.kappa0 + n;
    const double nu_n = prior.nu0 + n;
    Eigen::MatrixXd lambda_n = prior.lambda0;
    lambda_n.noalias() += centered * centered.transpose();
    lambda_n.noalias() += (prior.kappa0 * n / kappa_n) * (shift * shift.transpose());

    const Eigen::LLT<Eigen::MatrixXd> llt(lambda_n);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior scale matrix is not positive definite");
    const auto diag = llt.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) throw NumericalError("posterior scale matrix is not positive definite");
    const double log_det_lambda_n = 2.0 * diag.array().log().sum();

    const double md = static_cast<double>(m);
    const double value = -0.5 * n * md * std::log(std::numbers::pi) +
                         log_multivariate_gamma(static_cast<int>(m), 0.5 * nu_n) - log_gamma_nu0 +
                         0.5 * prior.nu0 * log_det_lambda0 - 0.5 * nu_n * log_det_lambda_n +
                         0.5 * md * (std::log(prior.kappa0) - std::log(kappa_n));
    if (!std::isfinite(value)) throw NumericalError("non-finite block marginal likelihood");
    return value;
  }
};

void check_dimensions(Eigen::Index rows, const NiwPrior& prior) {
  if (rows != prior.dimension()) {
    throw DimensionError("block has " + std::to_string(rows) + " ROIs but the prior has dimension " +
                         std::to_string(prior.dimension()));
  }
}

/// Memoized block scores for one series; keys are 0-based inclusive (first, last).
class BlockScorer {
 public:
  BlockScorer(const Eigen::MatrixXd& values, const PreparedPrior& prior) : values_(values), prior_(prior) {}

  double operator()(Eigen::Index first, Eigen::Index last) {
    const auto key = static_cast<std::uint64_t>(first) * static_cast<std::uint64_t>(values_.cols()) +
                     static_cast<std::uint64_t>(last);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double value;
    try {
      value = prior_.score(values_.middleCols(first, last - first + 1));
    } catch (const NumericalError& e) {
      throw NumericalError::at_block(first + 1, last + 1, e.what());
    }
    cache_.emplace(key, value);
    return value;
  }

 private:
  const Eigen::MatrixXd& values_;
  const PreparedPrior& prior_;
  std::unordered_map<std::uint64_t, double> cache_;
};

double bernoulli_prior_term(std::size_t length) {
  return static_cast<double>(length - 1) * std::log(0.5);
}

template <class Score>
double score_mask(const ChangePointMask& mask, Score&& score) {
  double total = 0.0;
  for (const auto& [begin, end] : mask.segments()) {
    total += score(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end) - 1);
  }
  return total + bernoulli_prior_term(mask.length());
}

}  // namespace

double log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& block, const NiwPrior& prior) {
  check_dimensions(block.rows(), prior);
  if (block.cols() < 1) throw DimensionError("block needs at least one column");
  const PreparedPrior prepared(prior);
  try {
    return prepared.score(block);
  } catch (const NumericalError& e) {
    throw NumericalError::at_block(1, block.cols(), e.what());
  }
}

double log_posterior(const ChangePointMask& mask, const RoiTimeSeries& series, const NiwPrior& prior) {
  check_dimensions(series.roi_count(), prior);
  if (static_cast<Eigen::Index>(mask.length()) != series.length()) {
    throw DimensionError("mask length does not match series length");
  }
  const PreparedPrior prepared(prior);
  BlockScorer scorer(series.values(), prepared);
  return score_mask(mask, scorer);
}

PosteriorSummary sample_posterior(const RoiTimeSeries& series, const NiwPrior& prior, const McmcConfig& config,
                                  const SampleObserver& observer) {
  config.validate();
  check_dimensions(series.roi_count(), prior);
  const auto T = static_cast<std::size_t>(series.length());
  const auto min_len = static_cast<std::size_t>(config.min_block_length);
  if (T < 2 * min_len) {
    throw ConfigError("series length " + std::to_string(T) + " is shorter than 2 * min_block_length");
  }

  const PreparedPrior prepared(prior);
  BlockScorer scorer(series.values(), prepared);
  Rng rng(config.seed);

  ChangePointMask state(T);
  std::vector<std::size_t> ones(T, 0);
  PosteriorSummary summary{state, std::vector<double>(T, 0.0), -std::numeric_limits<double>::infinity()};

  const int sweeps = config.burn_in + config.samples;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    std::size_t previous = 0;  // last change point strictly before t
    std::size_t next = 0;      // first change point strictly after t (or T)
    for (std::size_t t = 1; t < T; ++t) {
      if (next <= t) {
        next = t + 1;
        while (next < T && !state.test(next)) ++next;
      }

      const bool split_allowed = (t - previous) >= min_len && (next - t) >= min_len;
      bool on = false;
      if (split_allowed) {
        const auto a = static_cast<Eigen::Index>(previous);
        const auto ti = static_cast<Eigen::Index>(t);
        const auto c = static_cast<Eigen::Index>(next);
        const double log_on = scorer(a, ti - 1) + scorer(ti, c - 1);
        const double log_off = scorer(a, c - 1);
        const double p_on = 1.0 / (1.0 + std::exp(log_off - log_on));
        on = rng.uniform() < p_on;
      }
      state.set(t, on);
      if (on) previous = t;
    }

    if (sweep < config.burn_in) continue;
    const double score = score_mask(state, scorer);
    for (std::size_t t = 0; t < T; ++t) ones[t] += state.test(t) ? 1 : 0;
    if (score > summary.map_log_posterior) {
      summary.map_log_posterior = score;
      summary.map_mask = state;
    }
    if (observer) observer(state, score);
  }

  for (std::size_t t = 0; t < T; ++t) {
    summary.marginal_probability[t] = static_cast<double>(ones[t]) / static_cast<double>(config.samples);
  }
  return summary;
}

std::vector<RoiTimeSeries> extract_segments(const RoiTimeSeries& series, const ChangePointMask& mask) {
  if (static_cast<Eigen::Index>(mask.length()) != series.length()) {
    throw DimensionError("mask length does not match series length");
  }
  std::vector<RoiTimeSeries> out;
  for (const auto& [begin, end] : mask.segments()) {
    out.push_back(series.slice(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end)));
  }
  return out;
}

}  // namespace khelm::bccpm
