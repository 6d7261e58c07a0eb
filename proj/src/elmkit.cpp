#include "khelm/elmkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "khelm/error.hpp"
#include "khelm/rng.hpp"

namespace khelm::elmkit {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "sigmoid";
}

Activation activation_from_string(const std::string& name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(KernelKind k) { return k == KernelKind::rbf ? "rbf" : "linear"; }

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "linear") return KernelKind::linear;
  throw ConfigError("unknown kernel '" + name + "'");
}

LabeledDataset LabeledDataset::from_classes(Eigen::MatrixXd features, const std::vector<int>& classes,
                                            int class_count) {
  if (class_count < 2) throw ConfigError("class_count must be >= 2");
  if (static_cast<std::size_t>(features.rows()) != classes.size()) {
    throw DimensionError("feature rows and class labels differ in count");
  }
  if (features.rows() < class_count) throw DimensionError("dataset needs at least one row per class");
  LabeledDataset data;
  data.features = std::move(features);
  data.class_count = class_count;
  data.targets = Eigen::MatrixXd::Constant(data.features.rows(), class_count, -1.0);
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (classes[j] < 0 || classes[j] >= class_count) {
      throw ConfigError("class index " + std::to_string(classes[j]) + " outside [0, " +
                        std::to_string(class_count) + ")");
    }
    data.targets(static_cast<Eigen::Index>(j), classes[j]) = 1.0;
  }
  return data;
}

std::vector<int> LabeledDataset::classes() const { return argmax_rows(targets); }

LabeledDataset LabeledDataset::subset(const std::vector<Eigen::Index>& rows) const {
  LabeledDataset out;
  out.class_count = class_count;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(rows[i]);
  }
  return out;
}

ElmHiddenLayer random_hidden_layer(Eigen::Index input_dim, Eigen::Index node_count, Activation activation,
                                   std::uint64_t seed) {
  if (input_dim < 1 || node_count < 1) throw DimensionError("hidden layer needs d >= 1 and L >= 1");
  Rng rng(seed);
  ElmHiddenLayer layer{Eigen::MatrixXd(node_count, input_dim), Eigen::VectorXd(node_count), activation};
  for (Eigen::Index i = 0; i < node_count; ++i) {
    for (Eigen::Index k = 0; k < input_dim; ++k) layer.weights(i, k) = rng.uniform(-1.0, 1.0);
  }
  for (Eigen::Index i = 0; i < node_count; ++i) layer.biases(i) = rng.uniform(-1.0, 1.0);
  return layer;
}

Eigen::MatrixXd apply_activation(Eigen::MatrixXd z, Activation activation) {
  switch (activation) {
    case Activation::sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
  }
  return z;
}

Eigen::MatrixXd elm_hidden(const Eigen::MatrixXd& features, const ElmHiddenLayer& layer) {
  if (features.cols() != layer.weights.cols() || layer.biases.size() != layer.weights.rows()) {
    throw DimensionError("hidden layer expects " + std::to_string(layer.weights.cols()) + " input features, got " +
                         std::to_string(features.cols()));
  }
  Eigen::MatrixXd z = features * layer.weights.transpose();
  z.rowwise() += layer.biases.transpose();
  return apply_activation(std::move(z), layer.activation);
}

Eigen::MatrixXd solve_output_weights(const Eigen::MatrixXd& hidden, const Eigen::MatrixXd& targets) {
  if (hidden.rows() != targets.rows()) throw DimensionError("H and Z must have the same number of rows");
  return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(hidden).solve(targets);
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const KernelSpec& kernel) {
  if (x.cols() != y.cols()) {
    throw DimensionError("kernel inputs have " + std::to_string(x.cols()) + " and " + std::to_string(y.cols()) +
                         " features");
  }
  if (kernel.kind == KernelKind::linear) return x * y.transpose();
  if (!kernel.sigma || !(*kernel.sigma > 0.0)) throw ConfigError("rbf kernel needs sigma > 0");

  const double scale = 1.0 / (2.0 * *kernel.sigma * *kernel.sigma);
  const Eigen::MatrixXd xt = x.transpose();
  const Eigen::MatrixXd yt = y.transpose();
  Eigen::MatrixXd k(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      k(i, j) = std::exp(-(xt.col(i) - yt.col(j)).squaredNorm() * scale);
    }
  }
  return k;
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xt = x.transpose();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((xt.col(i) - xt.col(j)).norm());
  }
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double median = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return median > 0.0 ? median : 1.0;
}

KelmModel train_kelm(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, const KernelSpec& kernel,
                     double rho) {
  if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  if (features.rows() != targets.rows()) throw DimensionError("features and targets differ in row count");
  KelmModel model;
  model.training_features = features;
  model.kernel = kernel;
  model.rho = rho;
  if (kernel.kind == KernelKind::rbf && !kernel.sigma) model.kernel.sigma = median_pairwise_distance(features);

  Eigen::MatrixXd system = kernel_matrix(features, features, model.kernel);
  system.diagonal().array() += 1.0 / rho;
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("kernel system is not positive definite");
  model.alpha = llt.solve(targets);
  if (!model.alpha.allFinite()) throw NumericalError("kernel ELM solve produced non-finite coefficients");
  return model;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = static_cast<int>(c);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Prediction predict_kelm(const KelmModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.training_features.cols()) {
    throw DimensionError("model expects " + std::to_string(model.training_features.cols()) + " features, got " +
                         std::to_string(x.cols()));
  }
  Prediction p;
  p.scores = kernel_matrix(x, model.training_features, model.kernel) * model.alpha;
  p.labels = argmax_rows(p.scores);
  return p;
}

void FistaConfig::validate() const {
  if (iterations < 1) throw ConfigError("fista.iterations must be >= 1");
  if (!(l1_weight >= 0.0)) throw ConfigError("fista.l1_weight must be >= 0");
  if (!(lipschitz_boost >= 1.0)) throw ConfigError("fista.lipschitz_boost must be >= 1");
}

double lasso_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const Eigen::MatrixXd& beta,
                       double l1_weight) {
  return (a * beta - x).squaredNorm() + l1_weight * beta.cwiseAbs().sum();
}

double lipschitz_estimate(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd gram = a.transpose() * a;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(gram.rows(), 1.0 / std::sqrt(static_cast<double>(gram.rows())));
  double rayleigh = 0.0;
  for (int step = 0; step < 100; ++step) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    rayleigh = v.dot(gram * v);
  }
  return 2.0 * rayleigh;
}

Eigen::MatrixXd fista_lasso(const Eigen::MatrixXd& a, const Eigen::MatrixXd& x, const FistaConfig& config) {
  config.validate();
  if (a.rows() != x.rows()) throw DimensionError("A and X must have the same number of rows");
  const Eigen::Index l = a.cols();
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(l, x.cols());
  const double gamma = config.lipschitz_boost * lipschitz_estimate(a);
  if (!(gamma > 0.0)) return beta;  // A = 0: the zero solution is optimal

  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::MatrixXd ax = a.transpose() * x;
  const double threshold = config.l1_weight / gamma;
  Eigen::MatrixXd previous = beta;
  Eigen::MatrixXd y = beta;
  double t = 1.0;
  for (int i = 1; i <= config.iterations; ++i) {
    const Eigen::MatrixXd step = y - (2.0 / gamma) * (gram * y - ax);
    beta = step.unaryExpr([threshold](double v) {
      return v > threshold ? v - threshold : (v < -threshold ? v + threshold : 0.0);
    });
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = beta + ((t - 1.0) / t_next) * (beta - previous);
    if (!y.allFinite()) throw NumericalError::at_iteration(i, "FISTA diverged");
    previous = beta;
    t = t_next;
  }
  return beta;
}

SparseLayer train_sparse_layer(const Eigen::MatrixXd& x, Eigen::Index node_count, Activation activation,
                               const FistaConfig& fista, std::uint64_t seed) {
  if (x.rows() < 1) throw DimensionError("sparse layer needs at least one sample");
  const auto mapping = random_hidden_layer(x.cols(), node_count, activation, seed);
  const Eigen::MatrixXd a = elm_hidden(x, mapping);
  return SparseLayer{fista_lasso(a, x, fista), activation};
}

Eigen::MatrixXd forward_layer(const Eigen::MatrixXd& previous, const SparseLayer& layer) {
  if (previous.cols() != layer.beta.cols()) {
    throw DimensionError("layer expects " + std::to_string(layer.beta.cols()) + " inputs, got " +
                         std::to_string(previous.cols()));
  }
  return apply_activation(previous * layer.beta.transpose(), layer.activation);
}

MinMaxScaling MinMaxScaling::fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw DimensionError("cannot fit scaling on an empty matrix");
  return MinMaxScaling{x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose()};
}

Eigen::MatrixXd MinMaxScaling::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != min.size()) {
    throw DimensionError("scaling expects " + std::to_string(min.size()) + " features, got " +
                         std::to_string(x.cols()));
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double range = max(k) - min(k);
    if (range > 0.0) {
      out.col(k) = ((x.col(k).array() - min(k)) / range).cwiseMax(0.0).cwiseMin(1.0).matrix();
    } else {
      out.col(k).setZero();
    }
  }
  return out;
}

KhElmModel train_khelm(const LabeledDataset& data, const KhElmConfig& config, std::uint64_t seed) {
  if (config.layer_sizes.empty()) throw ConfigError("KH-ELM needs at least one hidden layer");
  for (int size : config.layer_sizes) {
    if (size < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
  KhElmModel model;
  model.scaling = MinMaxScaling::fit(data.features);
  Eigen::MatrixXd h = model.scaling.apply(data.features);
  for (std::size_t i = 0; i < config.layer_sizes.size(); ++i) {
    auto layer = train_sparse_layer(h, config.layer_sizes[i], config.activation, config.fista, derive_seed(seed, {i}));
    h = forward_layer(h, layer);
    model.layers.push_back(std::move(layer));
  }
  model.head = train_kelm(h, data.targets, config.kernel, config.rho);
  return model;
}

Eigen::MatrixXd khelm_features(const KhElmModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd h = model.scaling.apply(x);
  for (const auto& layer : model.layers) h = forward_layer(h, layer);
  return h;
}

Prediction predict_khelm(const KhElmModel& model, const Eigen::MatrixXd& x) {
  return predict_kelm(model.head, khelm_features(model, x));
}

}  // namespace khelm::elmkit
