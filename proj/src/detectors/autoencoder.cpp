#include <numeric>

#include <fmt/format.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::detect {

ReconstructionAutoencoder::ReconstructionAutoencoder(std::size_t window, std::size_t dims,
                                                     Vector input_mean, nn::DenseNetwork network)
    : window_(window), dims_(dims), input_mean_(std::move(input_mean)),
      network_(std::move(network)) {
  const std::size_t flat = window_ * dims_;
  if (network_.input_size() != flat || network_.output_size() != flat) {
    throw DataError(fmt::format("autoencoder network must map {} -> {} values", flat, flat));
  }
  if (static_cast<std::size_t>(input_mean_.size()) != flat || !input_mean_.allFinite()) {
    throw DataError(fmt::format("autoencoder input mean must hold {} finite values", flat));
  }
}

ReconstructionAutoencoder ReconstructionAutoencoder::fit(const data::WindowedDataset& train,
                                                         const AutoencoderParams& params,
                                                         std::uint64_t seed) {
  const std::size_t flat = train.flattened_dim();
  if (params.bottleneck == 0 || 2 * params.bottleneck > flat) {
    throw ConfigError(fmt::format(
        "autoencoder.bottleneck must be between 1 and half the flattened window ({}), got {}",
        flat / 2, params.bottleneck));
  }
  if (params.hidden == 0 || params.epochs == 0 || params.batch_size == 0 ||
      !(params.learning_rate > 0.0)) {
    throw ConfigError("autoencoder hidden, epochs, batch_size and learning_rate must be positive");
  }

  // Uncentred [0, 1] inputs push the relu code units into dead plateaus.
  const Vector mean = train.windows.colwise().mean().transpose();
  const Matrix centred = train.windows.rowwise() - mean.transpose();
  nn::DenseNetwork net = nn::DenseNetwork::initialize(
      {flat, params.hidden, params.bottleneck, params.hidden, flat}, derive_seed(seed, 0x6165));
  nn::AdamState adam(net);
  Rng rng = make_rng(seed, 0x61656261);
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(params.batch_size, n);
  Matrix inputs(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(flat));
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      for (std::size_t b = 0; b < batch; ++b) {
        inputs.row(static_cast<Eigen::Index>(b)) =
            centred.row(static_cast<Eigen::Index>(order[start + b]));
      }
      const auto result = nn::backward(net, inputs, nn::Loss::mse(), inputs);
      nn::adam_step(net, result.tape, params.learning_rate, adam);
    }
  }
  return ReconstructionAutoencoder(train.window_length, train.dims, mean, std::move(net));
}

std::vector<double> ReconstructionAutoencoder::score(const data::WindowedDataset& test) const {
  check_input(test);
  const Matrix centred = test.windows.rowwise() - input_mean_.transpose();
  const Matrix recon = network_.forward(centred);
  const Eigen::VectorXd err = (recon - centred).array().square().rowwise().mean();
  return std::vector<double>(err.data(), err.data() + err.size());
}

nlohmann::json ReconstructionAutoencoder::to_json() const {
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(kind())},
          {"window", window_},
          {"dims", dims_},
          {"input_mean", std::vector<double>(input_mean_.data(),
                                             input_mean_.data() + input_mean_.size())},
          {"network", network_.to_json()}};
}

ReconstructionAutoencoder ReconstructionAutoencoder::from_json(const nlohmann::json& doc) {
  const auto mean = doc.at("input_mean").get<std::vector<double>>();
  return ReconstructionAutoencoder(doc.at("window").get<std::size_t>(),
                                   doc.at("dims").get<std::size_t>(),
                                   Eigen::Map<const Vector>(mean.data(),
                                                            static_cast<Eigen::Index>(mean.size())),
                                   nn::DenseNetwork::from_json(doc.at("network")));
}

}  // namespace rlmsad::detect
