#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::detect {

LinearOcsvm::LinearOcsvm(Vector weights, double offset, double nu)
    : weights_(std::move(weights)), offset_(offset), nu_(nu) {
  if (weights_.size() == 0) throw ConfigError("one-class SVM needs at least one feature");
  if (!weights_.allFinite() || !std::isfinite(offset_)) {
    throw RuntimeFailure("one-class SVM parameters are not finite");
  }
}

LinearOcsvm LinearOcsvm::fit(const data::WindowedDataset& train, const OcsvmParams& params,
                             std::uint64_t seed) {
  if (!(params.nu > 0.0 && params.nu <= 1.0)) {
    throw ConfigError(fmt::format("ocsvm.nu must lie in (0, 1], got {}", params.nu));
  }
  if (!(params.learning_rate > 0.0)) throw ConfigError("ocsvm.learning_rate must be positive");
  if (params.epochs == 0) throw ConfigError("ocsvm.epochs must be >= 1");

  const std::size_t n = train.size();
  const auto d = train.windows.cols();
  Rng rng = make_rng(seed, 0x6f637376);
  Vector w = Vector::Zero(d);
  double rho = 0.0;
  Vector w_avg = Vector::Zero(d);
  double rho_avg = 0.0;
  std::size_t averaged = 0;
  const std::size_t average_from = params.epochs / 2;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t idx : order) {
      const double lr = params.learning_rate /
                        std::sqrt(1.0 + static_cast<double>(t) / static_cast<double>(n));
      const auto x = train.windows.row(static_cast<Eigen::Index>(idx)).transpose();
      const bool violated = rho - w.dot(x) > 0.0;
      // Subgradient of 1/2|w|^2 - rho + (1/nu) max(0, rho - w.x).
      Vector grad_w = w;
      double grad_rho = -1.0;
      if (violated) {
        grad_w -= x / params.nu;
        grad_rho += 1.0 / params.nu;
      }
      w -= lr * grad_w;
      rho -= lr * grad_rho;
      ++t;
      if (epoch >= average_from) {
        ++averaged;
        const double k = 1.0 / static_cast<double>(averaged);
        w_avg += k * (w - w_avg);
        rho_avg += k * (rho - rho_avg);
      }
    }
  }
  return LinearOcsvm(std::move(w_avg), rho_avg, params.nu);
}

std::vector<double> LinearOcsvm::score(const data::WindowedDataset& test) const {
  check_input(test);
  const Vector margins = test.windows * weights_;
  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = offset_ - margins[static_cast<Eigen::Index>(i)];
  }
  return scores;
}

nlohmann::json LinearOcsvm::to_json() const {
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(kind())},
          {"weights", std::vector<double>(weights_.data(), weights_.data() + weights_.size())},
          {"offset", offset_},
          {"nu", nu_}};
}

LinearOcsvm LinearOcsvm::from_json(const nlohmann::json& doc) {
  const auto w = doc.at("weights").get<std::vector<double>>();
  return LinearOcsvm(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
                     doc.at("offset").get<double>(), doc.at("nu").get<double>());
}

}  // namespace rlmsad::detect
