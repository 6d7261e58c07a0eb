#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "khelm/bccpm.hpp"
#include "khelm/error.hpp"
#include "khelm/serialization.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace khelm;
using namespace khelm::bccpm;

namespace {

NiwPrior scalar_prior(double kappa0, double nu0, double lambda0, double mu0) {
  NiwPrior p;
  p.kappa0 = kappa0;
  p.nu0 = nu0;
  p.lambda0 = Eigen::MatrixXd::Constant(1, 1, lambda0);
  p.mu0 = Eigen::VectorXd::Constant(1, mu0);
  return p;
}

std::vector<double> row_vector(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

ChangePointMask mask_from_code(std::size_t length, std::size_t code) {
  std::vector<std::uint8_t> bits(length, 0);
  bits[0] = 1;
  for (std::size_t t = 1; t < length; ++t) bits[t] = (code >> (t - 1)) & 1U;
  return ChangePointMask::from_bits(bits);
}

}  // namespace

TEST_CASE("ChangePointMask basics") {
  ChangePointMask mask(6);
  CHECK(mask.change_points() == std::vector<int>{1});
  mask.set(3, true);
  CHECK(mask.change_points() == std::vector<int>{1, 4});
  CHECK(mask.segment_count() == 2);
  CHECK(mask.segments() == std::vector<std::pair<std::size_t, std::size_t>>{{0, 3}, {3, 6}});
  CHECK_THROWS(mask.set(0, false));
  CHECK(mask.test(0));
  const std::vector<int> points{1, 4};
  CHECK(ChangePointMask::from_change_points(6, points) == mask);
  const std::vector<int> bad{7};
  CHECK_THROWS(ChangePointMask::from_change_points(6, bad));
  CHECK_THROWS(ChangePointMask::from_bits({0, 1, 0}));
}

TEST_CASE("mask JSON round trip") {
  const std::vector<int> points{1, 61};
  const auto mask = ChangePointMask::from_change_points(200, points);
  const auto j = io::mask_to_json(mask);
  CHECK(j == nlohmann::json::parse(R"({"T": 200, "change_points": [1, 61]})"));
  CHECK(io::mask_from_json(j) == mask);
}

TEST_CASE("log multivariate gamma reduces to lgamma for m = 1") {
  for (double a : {0.7, 1.5, 3.0, 12.25}) CHECK(log_multivariate_gamma(1, a) == doctest::Approx(std::lgamma(a)));
  const double expected = 0.5 * std::log(std::numbers::pi) + std::lgamma(2.0) + std::lgamma(1.5);
  CHECK(log_multivariate_gamma(2, 2.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("univariate marginal matches the Normal-Inverse-Gamma closed form") {
  SUBCASE("single observation at zero") {
    const auto prior = scalar_prior(1.0, 3.0, 1.0, 0.0);
    const Eigen::MatrixXd block = Eigen::MatrixXd::Zero(1, 1);
    CHECK(std::abs(log_marginal_likelihood(block, prior) - oracle::nig_log_marginal({0.0}, 1.0, 3.0, 1.0, 0.0)) <
          1e-10);
  }
  SUBCASE("200 random blocks and priors") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = static_cast<Eigen::Index>(1 + rng.below(40));
      const double kappa0 = rng.uniform(0.1, 5.0);
      const double nu0 = rng.uniform(0.5, 10.0);
      const double lambda0 = rng.uniform(0.1, 5.0);
      const double mu0 = rng.uniform(-2.0, 2.0);
      Eigen::MatrixXd block = khelm::testing::random_normal(1, n, rng) * rng.uniform(0.2, 3.0);
      block.array() += rng.uniform(-3.0, 3.0);
      const double got = log_marginal_likelihood(block, scalar_prior(kappa0, nu0, lambda0, mu0));
      const double want = oracle::nig_log_marginal(row_vector(block), kappa0, nu0, lambda0, mu0);
      CHECK(std::abs(got - want) < 1e-10);
    }
  }
}

TEST_CASE("bivariate marginal matches Monte Carlo integration over the prior") {
  Rng rng(77);
  NiwPrior prior;
  prior.kappa0 = 1.0;
  prior.nu0 = 6.0;
  prior.lambda0 = 3.0 * Eigen::MatrixXd::Identity(2, 2);
  prior.lambda0(0, 1) = prior.lambda0(1, 0) = 0.5;
  prior.mu0 = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd block = khelm::testing::random_normal(2, 4, rng);
  const auto mc = oracle::niw_marginal_monte_carlo(block, prior.kappa0, prior.nu0, prior.lambda0, prior.mu0,
                                                   1'000'000, 5);
  const double exact = std::exp(log_marginal_likelihood(block, prior));
  MESSAGE("exact " << exact << " mc " << mc.mean << " +- " << mc.standard_error);
  CHECK(std::abs(mc.mean - exact) / exact < 0.02);
}

TEST_CASE("marginal depends only on sufficient statistics") {
  Rng rng(8);
  const Eigen::MatrixXd block = khelm::testing::random_normal(3, 12, rng);
  const auto prior = NiwPrior::default_for(RoiTimeSeries(block));
  const double base = log_marginal_likelihood(block, prior);
  CHECK(std::abs(log_marginal_likelihood(block.rowwise().reverse(), prior) - base) < 1e-12);
  std::vector<Eigen::Index> order(12);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 100; ++trial) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    Eigen::MatrixXd shuffled(3, 12);
    for (Eigen::Index t = 0; t < 12; ++t) shuffled.col(t) = block.col(order[static_cast<std::size_t>(t)]);
    CHECK(std::abs(log_marginal_likelihood(shuffled, prior) - base) < 1e-10);
  }
}

TEST_CASE("prior validation") {
  NiwPrior p = scalar_prior(1.0, 3.0, 1.0, 0.0);
  CHECK_NOTHROW(p.validate());
  p.kappa0 = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = scalar_prior(1.0, -0.5, 1.0, 0.0);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  NiwPrior q;
  q.mu0 = Eigen::VectorXd::Zero(2);
  q.lambda0 = Eigen::MatrixXd::Identity(2, 2);
  q.lambda0(0, 1) = 0.1;
  CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("default prior and MCMC config") {
  Eigen::MatrixXd m(2, 4);
  m << 1, 2, 3, 4, 2, 2, 2, 2;
  const auto prior = NiwPrior::default_for(RoiTimeSeries(m));
  CHECK(prior.mu0(0) == doctest::Approx(2.5));
  CHECK(prior.mu0(1) == doctest::Approx(2.0));
  CHECK(prior.kappa0 == kDefaultKappa0);
  CHECK(prior.nu0 == 4.0);
  CHECK(prior.lambda0.isDiagonal());
  CHECK(prior.lambda0(0, 0) > 0.0);
  CHECK(McmcConfig::default_for(3).min_block_length == 2);
  CHECK(McmcConfig::default_for(10).min_block_length == 3);
  CHECK(McmcConfig::default_for(358).min_block_length == 90);
  CHECK(McmcConfig::default_for(10).burn_in == 500);
  CHECK(McmcConfig::default_for(10).samples == 1500);
}

TEST_CASE("log_posterior decomposes over segments") {
  Rng rng(13);
  const RoiTimeSeries series(khelm::testing::random_normal(2, 30, rng));
  const auto prior = NiwPrior::default_for(series);
  ChangePointMask single(30);
  CHECK(log_posterior(single, series, prior) ==
        doctest::Approx(log_marginal_likelihood(series, prior) + 29.0 * std::log(0.5)).epsilon(1e-14));
  for (int trial = 0; trial < 20; ++trial) {
    ChangePointMask mask(30);
    for (std::size_t t = 1; t < 30; ++t) mask.set(t, rng.uniform() < 0.2);
    double sum = 29.0 * std::log(0.5);
    for (const auto& seg : extract_segments(series, mask)) sum += log_marginal_likelihood(seg, prior);
    CHECK(std::abs(log_posterior(mask, series, prior) - sum) < 1e-9);
  }
}

TEST_CASE("exhaustive scoring of T = 6 masks against the direct evaluation") {
  Rng rng(21);
  const Eigen::MatrixXd x = khelm::testing::random_normal(1, 6, rng);
  const RoiTimeSeries series(x);
  const auto prior = scalar_prior(0.8, 2.5, 1.3, 0.2);
  const auto expected = oracle::enumerate_log_posterior(row_vector(x), 0.8, 2.5, 1.3, 0.2);
  REQUIRE(expected.size() == 32);
  for (std::size_t code = 0; code < 32; ++code) {
    CHECK(std::abs(log_posterior(mask_from_code(6, code), series, prior) - expected[code]) < 1e-10);
  }
}

TEST_CASE("rescaling the series with the prior preserves mask ranking") {
  Rng rng(5);
  const Eigen::MatrixXd x = khelm::testing::random_normal(1, 6, rng);
  const auto prior = scalar_prior(1.0, 3.0, 1.0, 0.1);
  const double c = 3.7;
  auto scaled_prior = prior;
  scaled_prior.lambda0 *= c * c;
  scaled_prior.mu0 *= c;
  const RoiTimeSeries a(x);
  const RoiTimeSeries b(c * x);
  std::vector<double> sa, sb;
  for (std::size_t code = 0; code < 32; ++code) {
    sa.push_back(log_posterior(mask_from_code(6, code), a, prior));
    sb.push_back(log_posterior(mask_from_code(6, code), b, scaled_prior));
  }
  std::vector<std::size_t> ra(32), rb(32);
  std::iota(ra.begin(), ra.end(), 0);
  std::iota(rb.begin(), rb.end(), 0);
  std::stable_sort(ra.begin(), ra.end(), [&](auto i, auto j) { return sa[i] > sa[j]; });
  std::stable_sort(rb.begin(), rb.end(), [&](auto i, auto j) { return sb[i] > sb[j]; });
  CHECK(ra == rb);
  for (std::size_t code = 0; code < 32; ++code) CHECK(sa[code] - sb[code] == doctest::Approx(6.0 * std::log(c)));
}

TEST_CASE("extract_segments partitions the series") {
  Eigen::MatrixXd m(1, 4);
  m << 1, 2, 3, 4;
  const RoiTimeSeries s(m);
  const auto one = extract_segments(s, ChangePointMask(4));
  REQUIRE(one.size() == 1);
  CHECK(one[0] == s);
  const auto two = extract_segments(s, ChangePointMask::from_bits({1, 0, 1, 0}));
  REQUIRE(two.size() == 2);
  CHECK(two[0].length() == 2);
  CHECK(two[1].length() == 2);

  Rng rng(4);
  const RoiTimeSeries big(khelm::testing::random_normal(3, 50, rng));
  ChangePointMask mask(50);
  for (std::size_t t = 1; t < 50; ++t) mask.set(t, rng.uniform() < 0.3);
  const auto parts = extract_segments(big, mask);
  CHECK(parts.size() == mask.segment_count());
  Eigen::MatrixXd joined(3, 50);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    joined.middleCols(col, p.length()) = p.values();
    col += p.length();
  }
  CHECK(joined == big.values());
  CHECK_THROWS_AS(extract_segments(big, ChangePointMask(49)), DimensionError);
}

TEST_CASE("sampler bit marginals match exhaustive enumeration for T = 6") {
  Rng rng(31);
  Eigen::MatrixXd x(1, 6);
  x << 0.1, -0.3, 0.2, 2.1, 1.8, 2.4;
  const auto prior = scalar_prior(1.0, 3.0, 1.0, 0.0);
  const auto logp = oracle::enumerate_log_posterior(row_vector(x), 1.0, 3.0, 1.0, 0.0);
  const double top = *std::max_element(logp.begin(), logp.end());
  std::vector<double> prob(32);
  double z = 0.0;
  for (std::size_t c = 0; c < 32; ++c) z += prob[c] = std::exp(logp[c] - top);
  for (double& p : prob) p /= z;

  McmcConfig config;
  config.burn_in = 200;
  config.samples = 20000;
  config.seed = 9;
  config.min_block_length = 1;
  std::vector<double> visits(32, 0.0);
  const auto summary = sample_posterior(RoiTimeSeries(x), prior, config, [&](const ChangePointMask& mask, double) {
    std::size_t code = 0;
    for (std::size_t t = 1; t < 6; ++t) code |= static_cast<std::size_t>(mask.test(t)) << (t - 1);
    visits[code] += 1.0;
  });

  double max_bit_gap = 0.0;
  for (std::size_t t = 1; t < 6; ++t) {
    double exact = 0.0;
    for (std::size_t c = 0; c < 32; ++c) exact += ((c >> (t - 1)) & 1U) ? prob[c] : 0.0;
    max_bit_gap = std::max(max_bit_gap, std::abs(exact - summary.marginal_probability[t]));
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < 32; ++c) tv += std::abs(visits[c] / 20000.0 - prob[c]);
  tv *= 0.5;
  MESSAGE("max bit gap " << max_bit_gap << ", joint total variation " << tv);
  CHECK(summary.marginal_probability[0] == 1.0);
  CHECK(max_bit_gap < 0.05);
  CHECK(tv < 0.05);

  const auto best = std::max_element(logp.begin(), logp.end()) - logp.begin();
  CHECK(summary.map_mask == mask_from_code(6, static_cast<std::size_t>(best)));
  CHECK(summary.map_log_posterior == doctest::Approx(top).epsilon(1e-12));
}

TEST_CASE("sampler honours the minimum block length and is deterministic") {
  Rng rng(3);
  const RoiTimeSeries series(khelm::testing::random_normal(2, 40, rng));
  const auto prior = NiwPrior::default_for(series);
  McmcConfig config;
  config.burn_in = 20;
  config.samples = 100;
  config.seed = 17;
  config.min_block_length = 4;
  bool short_block = false;
  const auto a = sample_posterior(series, prior, config, [&](const ChangePointMask& mask, double score) {
    for (const auto& [b, e] : mask.segments()) short_block = short_block || e - b < 4;
    CHECK(score == doctest::Approx(log_posterior(mask, series, prior)).epsilon(1e-12));
  });
  CHECK_FALSE(short_block);
  const auto b = sample_posterior(series, prior, config);
  CHECK(a.map_mask == b.map_mask);
  CHECK(a.marginal_probability == b.marginal_probability);
  CHECK(a.map_log_posterior == b.map_log_posterior);

  config.min_block_length = 21;
  CHECK_THROWS_AS(sample_posterior(series, prior, config), ConfigError);
}

TEST_CASE("null series rarely gains spurious change points") {
  int clean = 0;
  for (int run = 0; run < 30; ++run) {
    Rng rng(derive_seed(1000, {static_cast<std::uint64_t>(run)}));
    const RoiTimeSeries series(khelm::testing::random_normal(3, 120, rng));
    auto config = McmcConfig::default_for(3);
    config.seed = derive_seed(2000, {static_cast<std::uint64_t>(run)});
    const auto summary = sample_posterior(series, NiwPrior::default_for(series), config);
    if (summary.map_mask.change_points().size() <= 2) ++clean;
  }
  MESSAGE(clean << " of 30 null runs with at most one spurious point");
  CHECK(clean >= 27);
}

TEST_CASE("planted change near t = 61 is recovered") {
  SyntheticCohortSpec spec;
  spec.subjects_per_class = 15;
  spec.roi_count = 5;
  spec.length = 120;
  spec.change_points_class_a = {61};
  spec.change_points_class_b = {61};
  spec.mean_shift = 2.0;
  const auto cohort = generate_synthetic(spec, 4242);
  int hits = 0;
  for (std::size_t s = 0; s < cohort.subjects.size(); ++s) {
    auto config = McmcConfig::default_for(5);
    config.seed = derive_seed(77, {s});
    const auto summary = sample_posterior(cohort.subjects[s], NiwPrior::default_for(cohort.subjects[s]), config);
    const auto points = summary.map_mask.change_points();
    if (std::any_of(points.begin() + 1, points.end(), [](int t) { return std::abs(t - 61) <= 3; })) ++hits;
  }
  MESSAGE(hits << " of 30 runs recover the change");
  CHECK(hits >= 24);
}

TEST_CASE("posterior JSON") {
  Rng rng(1);
  const RoiTimeSeries series(khelm::testing::random_normal(2, 20, rng));
  McmcConfig config;
  config.burn_in = 5;
  config.samples = 10;
  const auto summary = sample_posterior(series, NiwPrior::default_for(series), config);
  const auto j = io::posterior_to_json(summary);
  CHECK(j.at("T") == 20);
  CHECK(j.at("change_points")[0] == 1);
  CHECK(j.at("marginal_probability").size() == 20);
  CHECK(io::mask_from_json(j) == summary.map_mask);
}
