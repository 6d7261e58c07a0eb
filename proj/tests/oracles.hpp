#pragma once

// Reference computations written independently of the library code paths.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace khelm::oracle {

/// Normal-Inverse-Gamma marginal of a scalar sample: sigma^2 ~ IG(nu0/2, lambda0/2),
/// mu | sigma^2 ~ N(mu0, sigma^2 / kappa0).
inline double nig_log_marginal(const std::vector<double>& x, double kappa0, double nu0, double lambda0, double mu0) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double alpha = nu0 / 2.0;
  const double beta = lambda0 / 2.0;
  const double kappa_n = kappa0 + n;
  const double alpha_n = alpha + n / 2.0;
  const double beta_n = beta + 0.5 * ss + kappa0 * n * (mean - mu0) * (mean - mu0) / (2.0 * kappa_n);
  return std::lgamma(alpha_n) - std::lgamma(alpha) + alpha * std::log(beta) - alpha_n * std::log(beta_n) +
         0.5 * (std::log(kappa0) - std::log(kappa_n)) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Averages prod_t N(z_t; mu, Sigma) over draws Sigma ~ IW(lambda0, nu0),
/// mu ~ N(mu0, Sigma / kappa0). Wishart draws use the Bartlett decomposition.
inline MonteCarloEstimate niw_marginal_monte_carlo(const Eigen::MatrixXd& block, double kappa0, double nu0,
                                                   const Eigen::MatrixXd& lambda0, const Eigen::VectorXd& mu0,
                                                   long draws, std::uint64_t seed) {
  const Eigen::Index m = block.rows();
  const Eigen::Index n = block.cols();
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::chi_squared_distribution<double>> chi;
  for (Eigen::Index i = 0; i < m; ++i) chi.emplace_back(nu0 - static_cast<double>(i));
  const Eigen::MatrixXd scale_chol = lambda0.inverse().llt().matrixL();
  const double log_norm = -0.5 * static_cast<double>(m * n) * std::log(2.0 * std::numbers::pi);

  double sum = 0.0;
  double sum_sq = 0.0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (long d = 0; d < draws; ++d) {
    for (Eigen::Index i = 0; i < m; ++i) {
      a(i, i) = std::sqrt(chi[static_cast<std::size_t>(i)](engine));
      for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(engine);
    }
    const Eigen::MatrixXd la = scale_chol * a;
    const Eigen::MatrixXd precision = la * la.transpose();
    const Eigen::MatrixXd sigma = precision.inverse();
    const Eigen::MatrixXd sigma_chol = Eigen::LLT<Eigen::MatrixXd>(sigma / kappa0).matrixL();
    Eigen::VectorXd eps(m);
    for (Eigen::Index i = 0; i < m; ++i) eps(i) = normal(engine);
    const Eigen::VectorXd mu = mu0 + sigma_chol * eps;

    double quad = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::VectorXd r = block.col(t) - mu;
      quad += r.dot(precision * r);
    }
    const double log_det_precision = std::log(precision.determinant());
    const double value = std::exp(log_norm + 0.5 * static_cast<double>(n) * log_det_precision - 0.5 * quad);
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / static_cast<double>(draws);
  const double var = sum_sq / static_cast<double>(draws) - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(draws))};
}

/// Unnormalized log posterior of every mask over a scalar series under the
/// Bernoulli(1/2) prior. Index bit k-1 of the mask number is L_{k+1}.
inline std::vector<double> enumerate_log_posterior(const std::vector<double>& x, double kappa0, double nu0,
                                                   double lambda0, double mu0) {
  const std::size_t free_bits = x.size() - 1;
  std::vector<double> out(std::size_t{1} << free_bits);
  for (std::size_t code = 0; code < out.size(); ++code) {
    double total = static_cast<double>(free_bits) * std::log(0.5);
    std::size_t start = 0;
    for (std::size_t t = 1; t <= x.size(); ++t) {
      const bool boundary = t == x.size() || ((code >> (t - 1)) & 1U);
      if (!boundary) continue;
      total += nig_log_marginal(std::vector<double>(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(t)),
                                kappa0, nu0, lambda0, mu0);
      start = t;
    }
    out[code] = total;
  }
  return out;
}

/// Plain proximal gradient for ||A b - X||_F^2 + lambda ||b||_1 with step 1/gamma.
inline Eigen::MatrixXd ista(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, double lambda, double gamma,
                            int iterations) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(a.cols(), x.cols());
  const double thresh = lambda / gamma;
  for (int k = 0; k < iterations; ++k) {
    const Eigen::MatrixXd g = 2.0 * a.transpose() * (a * b - x);
    b = b - g / gamma;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        const double v = b(i, j);
        b(i, j) = v > thresh ? v - thresh : (v < -thresh ? v + thresh : 0.0);
      }
    }
  }
  return b;
}

/// Exact 2 sigma_max(A)^2 from the SVD.
inline double exact_lipschitz(const Eigen::MatrixXd& a) {
  const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  return 2.0 * s * s;
}

inline Eigen::MatrixXd svd_pseudo_inverse(const Eigen::MatrixXd& h) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double tol = 1e-12 * s(0) * static_cast<double>(std::max(h.rows(), h.cols()));
  Eigen::VectorXd inv = s;
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > tol ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace khelm::oracle
