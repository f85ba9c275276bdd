#ifndef RLMSAD_NEURALCORE_HPP_
#define RLMSAD_NEURALCORE_HPP_

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlmsad/dataio.hpp"

namespace rlmsad::nn {

inline constexpr int kNetworkFormatVersion = 1;

// One affine layer; weights are (out x in).
struct Layer {
  Matrix weights;
  Vector bias;
};

// Fully connected network: relu on hidden layers, identity on the output.
class DenseNetwork {
 public:
  // Zero-initialized parameters. `sizes` lists input, hidden..., output.
  explicit DenseNetwork(std::vector<std::size_t> sizes);

  static DenseNetwork initialize(std::vector<std::size_t> sizes, std::uint64_t seed);

  // batch is (rows x input size); returns (rows x output size).
  Matrix forward(const Matrix& batch) const;
  Vector forward_one(const Vector& input) const;

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool all_finite() const;

  nlohmann::json to_json() const;
  static DenseNetwork from_json(const nlohmann::json& doc);

  friend bool operator==(const DenseNetwork& a, const DenseNetwork& b);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
};

// Gradients with the same shapes as the network's layers.
struct GradientTape {
  std::vector<Layer> layers;

  static GradientTape zeros_like(const DenseNetwork& net);
  bool all_finite() const;
};

enum class LossKind { kMse, kHuber };

struct Loss {
  LossKind kind = LossKind::kMse;
  double delta = 1.0;

  static Loss mse() { return {LossKind::kMse, 1.0}; }
  static Loss huber(double delta) { return {LossKind::kHuber, delta}; }

  double value(double residual) const;
  double derivative(double residual) const;
};

struct BackwardResult {
  double loss = 0.0;
  GradientTape tape;
};

// Mean elementwise loss over the active output entries and its exact gradient.
// `mask`, when given, has the output's shape; entries equal to 0 are ignored.
BackwardResult backward(const DenseNetwork& net, const Matrix& batch, const Loss& loss,
                        const Matrix& targets, const Matrix* mask = nullptr);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit AdamState(const DenseNetwork& net);

  GradientTape first_moment;
  GradientTape second_moment;
  std::uint64_t steps = 0;
};

// Bias-corrected adaptive-moment update.
void adam_step(DenseNetwork& net, const GradientTape& tape, double learning_rate,
               AdamState& state);

}  // namespace rlmsad::nn

#endif  // RLMSAD_NEURALCORE_HPP_
