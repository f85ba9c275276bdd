#include "rlmsad/neuralcore.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::nn {

namespace {

void check_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) {
    throw ConfigError("network needs at least an input and an output size");
  }
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("network layer sizes must be positive");
  }
}

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

std::vector<double> flatten(const Matrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  check_sizes(sizes_);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
  }
}

DenseNetwork DenseNetwork::initialize(std::vector<std::size_t> sizes, std::uint64_t seed) {
  DenseNetwork net(std::move(sizes));
  Rng rng = make_rng(seed, 0x6e6574);
  for (auto& layer : net.layers_) {
    // Unit-variance-scaled uniform: U(-sqrt(3/fan_in), sqrt(3/fan_in)).
    const double bound = std::sqrt(3.0 / static_cast<double>(layer.weights.cols()));
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return net;
}

Matrix DenseNetwork::forward(const Matrix& batch) const {
  if (static_cast<std::size_t>(batch.cols()) != input_size()) {
    throw DataError(fmt::format("network expects {} inputs, got {}", input_size(), batch.cols()));
  }
  Matrix a = batch;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = a * layers_[l].weights.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    a = l + 1 < layers_.size() ? relu(z) : std::move(z);
  }
  return a;
}

Vector DenseNetwork::forward_one(const Vector& input) const {
  if (static_cast<std::size_t>(input.size()) != input_size()) {
    throw DataError(fmt::format("network expects {} inputs, got {}", input_size(), input.size()));
  }
  Vector a = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Vector z = layers_[l].weights * a + layers_[l].bias;
    a = l + 1 < layers_.size() ? Vector(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

bool DenseNetwork::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

nlohmann::json DenseNetwork::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", flatten(layer.weights)},
                      {"bias", std::vector<double>(layer.bias.data(),
                                                   layer.bias.data() + layer.bias.size())}});
  }
  std::vector<std::string> activations(layers_.size(), "relu");
  activations.back() = "identity";
  return {{"format_version", kNetworkFormatVersion},
          {"sizes", sizes_},
          {"activations", activations},
          {"layers", layers}};
}

DenseNetwork DenseNetwork::from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kNetworkFormatVersion) {
      throw DataError(fmt::format("network format_version {} is not supported (expected {})",
                                  version, kNetworkFormatVersion));
    }
    DenseNetwork net(doc.at("sizes").get<std::vector<std::size_t>>());
    const auto& layers = doc.at("layers");
    if (layers.size() != net.layers_.size()) throw DataError("network layer count mismatch");
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& layer = net.layers_[l];
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(layer.weights.size()) ||
          b.size() != static_cast<std::size_t>(layer.bias.size())) {
        throw DataError(fmt::format("network layer {} has wrong parameter count", l));
      }
      std::copy(w.begin(), w.end(), layer.weights.data());
      std::copy(b.begin(), b.end(), layer.bias.data());
    }
    if (!net.all_finite()) throw DataError("network parameters must be finite");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt network document: {}", e.what()));
  }
}

bool operator==(const DenseNetwork& a, const DenseNetwork& b) {
  if (a.sizes_ != b.sizes_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weights != b.layers_[l].weights) return false;
    if (a.layers_[l].bias != b.layers_[l].bias) return false;
  }
  return true;
}

GradientTape GradientTape::zeros_like(const DenseNetwork& net) {
  GradientTape tape;
  for (const auto& layer : net.layers()) {
    tape.layers.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                           Vector::Zero(layer.bias.size())});
  }
  return tape;
}

bool GradientTape::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

double Loss::value(double residual) const {
  if (kind == LossKind::kMse) return residual * residual;
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

double Loss::derivative(double residual) const {
  if (kind == LossKind::kMse) return 2.0 * residual;
  return std::clamp(residual, -delta, delta);
}

BackwardResult backward(const DenseNetwork& net, const Matrix& batch, const Loss& loss,
                        const Matrix& targets, const Matrix* mask) {
  if (static_cast<std::size_t>(batch.cols()) != net.input_size()) {
    throw DataError(
        fmt::format("network expects {} inputs, got {}", net.input_size(), batch.cols()));
  }
  if (targets.rows() != batch.rows() ||
      static_cast<std::size_t>(targets.cols()) != net.output_size()) {
    throw DataError(fmt::format("targets shape {}x{} does not match output {}x{}",
                                targets.rows(), targets.cols(), batch.rows(),
                                net.output_size()));
  }
  if (mask && (mask->rows() != targets.rows() || mask->cols() != targets.cols())) {
    throw DataError("loss mask shape does not match targets");
  }

  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  // activations[l] is the input to layer l; pre[l] its pre-activation output.
  std::vector<Matrix> activations(depth + 1);
  std::vector<Matrix> pre(depth);
  activations[0] = batch;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = activations[l] * layers[l].weights.transpose();
    pre[l].rowwise() += layers[l].bias.transpose();
    activations[l + 1] = l + 1 < depth ? relu(pre[l]) : pre[l];
  }
  const Matrix& output = activations[depth];
  if (!output.allFinite()) throw RuntimeFailure("non-finite network output in backward pass");

  double active = 0.0;
  double total = 0.0;
  Matrix delta(output.rows(), output.cols());
  for (Eigen::Index i = 0; i < output.rows(); ++i) {
    for (Eigen::Index k = 0; k < output.cols(); ++k) {
      const double m = mask ? (*mask)(i, k) : 1.0;
      if (m == 0.0) {
        delta(i, k) = 0.0;
        continue;
      }
      const double r = output(i, k) - targets(i, k);
      total += loss.value(r);
      delta(i, k) = loss.derivative(r);
      active += 1.0;
    }
  }
  BackwardResult result{0.0, GradientTape::zeros_like(net)};
  if (active == 0.0) return result;
  result.loss = total / active;
  delta /= active;

  for (std::size_t l = depth; l-- > 0;) {
    result.tape.layers[l].weights = delta.transpose() * activations[l];
    result.tape.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix upstream = delta * layers[l].weights;
      delta = upstream.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  if (!std::isfinite(result.loss) || !result.tape.all_finite()) {
    throw RuntimeFailure("non-finite loss or gradient in backward pass");
  }
  return result;
}

AdamState::AdamState(const DenseNetwork& net)
    : first_moment(GradientTape::zeros_like(net)),
      second_moment(GradientTape::zeros_like(net)) {}

void adam_step(DenseNetwork& net, const GradientTape& tape, double learning_rate,
               AdamState& state) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (tape.layers.size() != net.layers().size()) {
    throw DataError("gradient tape does not match the network");
  }
  if (!tape.all_finite()) throw RuntimeFailure("non-finite gradient passed to optimizer");

  state.steps += 1;
  const double t = static_cast<double>(state.steps);
  const double correction1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double correction2 = 1.0 - std::pow(AdamState::kBeta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = AdamState::kBeta1 * m + (1.0 - AdamState::kBeta1) * grad;
    v = AdamState::kBeta2 * v + (1.0 - AdamState::kBeta2) * grad.cwiseProduct(grad);
    param.array() -= learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + AdamState::kEpsilon);
  };
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    const auto& grad = tape.layers[l];
    if (grad.weights.rows() != layer.weights.rows() ||
        grad.weights.cols() != layer.weights.cols()) {
      throw DataError("gradient tape does not match the network");
    }
    update(layer.weights, grad.weights, state.first_moment.layers[l].weights,
           state.second_moment.layers[l].weights);
    update(layer.bias, grad.bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

}  // namespace rlmsad::nn
