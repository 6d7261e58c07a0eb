#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace khelm::elmkit {

enum class Activation { sigmoid, relu, tanh };

std::string to_string(Activation a);
/// Throws ConfigError on unknown names.
Activation activation_from_string(const std::string& name);

/// Features with one-vs-rest targets: row j of `targets` is +1 at the sample's
/// class and -1 elsewhere.
struct LabeledDataset {
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;
  int class_count = 2;

  /// Throws DimensionError / ConfigError when invariants fail.
  static LabeledDataset from_classes(Eigen::MatrixXd features, const std::vector<int>& classes,
                                     int class_count);
  std::vector<int> classes() const;
  Eigen::Index size() const noexcept { return features.rows(); }
  LabeledDataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct ElmHiddenLayer {
  Eigen::MatrixXd weights;  // L x d
  Eigen::VectorXd biases;   // L
  Activation activation = Activation::sigmoid;
};

/// Weights and biases uniform on [-1, 1].
ElmHiddenLayer random_hidden_layer(Eigen::Index input_dim, Eigen::Index node_count,
                                   Activation activation, std::uint64_t seed);

Eigen::MatrixXd apply_activation(Eigen::MatrixXd z, Activation activation);

/// H[j, i] = h(w_i . x_j + b_i).
Eigen::MatrixXd elm_hidden(const Eigen::MatrixXd& features, const ElmHiddenLayer& layer);

/// Minimum-norm least-squares solution of H beta = Z.
Eigen::MatrixXd solve_output_weights(const Eigen::MatrixXd& hidden, const Eigen::MatrixXd& targets);

enum class KernelKind { rbf, linear };

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  /// RBF width. When unset, train_kelm uses the median pairwise distance.
  std::optional<double> sigma;
};

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& name);

/// rbf: exp(-|x - y|^2 / (2 sigma^2)); linear: x . y.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& kernel);

/// Median of pairwise Euclidean distances between rows (1 if all coincide).
double median_pairwise_distance(const Eigen::MatrixXd& x);

struct KelmModel {
  Eigen::MatrixXd training_features;
  Eigen::MatrixXd alpha;  // (I / rho + Omega)^{-1} Z
  KernelSpec kernel;      // sigma always resolved
  double rho = 1.0;
};

struct Prediction {
  Eigen::MatrixXd scores;
  std::vector<int> labels;  // class indices; ties go to the lowest index
};

KelmModel train_kelm(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                     const KernelSpec& kernel, double rho);
inline KelmModel train_kelm(const LabeledDataset& data, const KernelSpec& kernel, double rho) {
  return train_kelm(data.features, data.targets, kernel, rho);
}
Prediction predict_kelm(const KelmModel& model, const Eigen::MatrixXd& x);

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

struct FistaConfig {
  int iterations = 200;
  double l1_weight = 1e-3;
  double lipschitz_boost = 1.01;

  void validate() const;
};

/// ||A beta - X||_F^2 + lambda ||beta||_1.
double lasso_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta,
                       double l1_weight);

/// 2 sigma_max(A)^2 from 100 power-iteration steps on A^T A.
double lipschitz_estimate(const Eigen::MatrixXd& a);

/// Constant-step FISTA for min ||A beta - X||_F^2 + lambda ||beta||_1 starting
/// from beta = 0. Runs exactly `config.iterations` steps.
Eigen::MatrixXd fista_lasso(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const FistaConfig& config);

struct SparseLayer {
  Eigen::MatrixXd beta;  // L x p
  Activation activation = Activation::sigmoid;
};

/// ELM sparse autoencoder: A = h(X W^T + b) for a random layer drawn from
/// `seed`, beta = fista_lasso(A, X).
SparseLayer train_sparse_layer(const Eigen::MatrixXd& x, Eigen::Index node_count, Activation activation,
                               const FistaConfig& fista, std::uint64_t seed);

/// g(H_prev beta^T).
Eigen::MatrixXd forward_layer(const Eigen::MatrixXd& previous, const SparseLayer& layer);

struct MinMaxScaling {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static MinMaxScaling fit(const Eigen::MatrixXd& x);
  /// Maps to [0, 1], clipping outside the fitted range; constant features map to 0.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct KhElmModel {
  std::vector<SparseLayer> layers;
  KelmModel head;
  MinMaxScaling scaling;
};

struct KhElmConfig {
  std::vector<int> layer_sizes{64};
  KernelSpec kernel;
  double rho = 1.0;
  FistaConfig fista;
  Activation activation = Activation::sigmoid;
};

/// Greedy layer-wise training (no fine-tuning) followed by a KELM head on H_n.
/// Layer i uses the stream derive_seed(seed, {i}).
KhElmModel train_khelm(const LabeledDataset& data, const KhElmConfig& config, std::uint64_t seed);

/// Scaled input propagated through every sparse layer.
Eigen::MatrixXd khelm_features(const KhElmModel& model, const Eigen::MatrixXd& x);
Prediction predict_khelm(const KhElmModel& model, const Eigen::MatrixXd& x);

}  // namespace khelm::elmkit
