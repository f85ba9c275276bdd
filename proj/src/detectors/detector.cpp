#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/errors.hpp"

namespace rlmsad::detect {

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kIForest: return "iforest";
    case DetectorKind::kOcsvmSgd: return "ocsvm_sgd";
    case DetectorKind::kEcod: return "ecod";
    case DetectorKind::kCopod: return "copod";
    case DetectorKind::kAutoencoder: return "autoencoder";
  }
  return "unknown";
}

DetectorKind parse_detector_kind(const std::string& name) {
  for (DetectorKind kind : all_detector_kinds()) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError(fmt::format(
      "unknown detector kind '{}' (expected iforest, ocsvm_sgd, ecod, copod, autoencoder)",
      name));
}

const std::vector<DetectorKind>& all_detector_kinds() {
  static const std::vector<DetectorKind> kinds = {
      DetectorKind::kIForest, DetectorKind::kOcsvmSgd, DetectorKind::kEcod,
      DetectorKind::kCopod, DetectorKind::kAutoencoder};
  return kinds;
}

void validate_pool(const std::vector<DetectorKind>& pool) {
  if (pool.size() < 2) {
    throw ConfigError(fmt::format("the model pool needs at least 2 detectors, got {}",
                                  pool.size()));
  }
  std::set<DetectorKind> seen;
  for (DetectorKind kind : pool) {
    if (!seen.insert(kind).second) {
      throw ConfigError(fmt::format("detector '{}' appears twice in the pool", to_string(kind)));
    }
  }
}

std::size_t DetectorHyper::window_for(DetectorKind kind) const {
  return kind == DetectorKind::kAutoencoder ? autoencoder.window : 1;
}

void DetectorHyper::validate() const {
  if (iforest.trees == 0) throw ConfigError("iforest.trees must be >= 1");
  if (iforest.subsample < 2) throw ConfigError("iforest.subsample must be >= 2");
  if (!(ocsvm.nu > 0.0 && ocsvm.nu <= 1.0)) throw ConfigError("ocsvm.nu must lie in (0, 1]");
  if (!(ocsvm.learning_rate > 0.0)) throw ConfigError("ocsvm.learning_rate must be positive");
  if (ocsvm.epochs == 0) throw ConfigError("ocsvm.epochs must be >= 1");
  if (autoencoder.window == 0) throw ConfigError("autoencoder.window must be >= 1");
  if (autoencoder.hidden == 0 || autoencoder.bottleneck == 0 || autoencoder.epochs == 0 ||
      autoencoder.batch_size == 0 || !(autoencoder.learning_rate > 0.0)) {
    throw ConfigError("autoencoder sizes, epochs, batch_size and learning_rate must be positive");
  }
}

void Detector::check_input(const data::WindowedDataset& test) const {
  if (test.window_length != window_length() || test.dims != dims() ||
      static_cast<std::size_t>(test.windows.cols()) != window_length() * dims()) {
    throw DataError(fmt::format("{} was fitted on windows of {}x{} but received {}x{}",
                                to_string(kind()), window_length(), dims(),
                                test.window_length, test.dims));
  }
}

std::unique_ptr<Detector> fit(DetectorKind kind, const data::WindowedDataset& train,
                              const DetectorHyper& hyper, std::uint64_t seed) {
  if (train.size() < kMinTrainingRows) {
    throw DataError(fmt::format("{} needs at least {} training rows, got {}", to_string(kind),
                                kMinTrainingRows, train.size()));
  }
  const std::size_t expected_window = hyper.window_for(kind);
  if (train.window_length != expected_window) {
    throw ConfigError(fmt::format("{} expects window length {}, got {}", to_string(kind),
                                  expected_window, train.window_length));
  }
  switch (kind) {
    case DetectorKind::kIForest:
      return std::make_unique<IsolationForest>(IsolationForest::fit(train, hyper.iforest, seed));
    case DetectorKind::kOcsvmSgd:
      return std::make_unique<LinearOcsvm>(LinearOcsvm::fit(train, hyper.ocsvm, seed));
    case DetectorKind::kEcod:
    case DetectorKind::kCopod:
      return std::make_unique<EcdfDetector>(EcdfDetector::fit(kind, train));
    case DetectorKind::kAutoencoder:
      return std::make_unique<ReconstructionAutoencoder>(
          ReconstructionAutoencoder::fit(train, hyper.autoencoder, seed));
  }
  throw ConfigError("unknown detector kind");
}

nlohmann::json serialize(const Detector& model) { return model.to_json(); }

std::unique_ptr<Detector> deserialize(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("format_version")) {
      throw DataError("model document has no format_version");
    }
    const auto& version = doc.at("format_version");
    const std::string v = version.is_string() ? version.get<std::string>() : version.dump();
    if (v != std::to_string(kModelFormatVersion)) {
      throw DataError(fmt::format("model format_version {} is not supported (expected {})", v,
                                  kModelFormatVersion));
    }
    switch (parse_detector_kind(doc.at("kind").get<std::string>())) {
      case DetectorKind::kIForest:
        return std::make_unique<IsolationForest>(IsolationForest::from_json(doc));
      case DetectorKind::kOcsvmSgd:
        return std::make_unique<LinearOcsvm>(LinearOcsvm::from_json(doc));
      case DetectorKind::kEcod:
      case DetectorKind::kCopod:
        return std::make_unique<EcdfDetector>(EcdfDetector::from_json(doc));
      case DetectorKind::kAutoencoder:
        return std::make_unique<ReconstructionAutoencoder>(
            ReconstructionAutoencoder::from_json(doc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt model document: {}", e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("corrupt model document: {}", e.what()));
  }
  throw DataError("corrupt model document");
}

std::unique_ptr<Detector> deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("model document does not parse: {}", e.what()));
  }
  return deserialize(doc);
}

// --- thresholding ---------------------------------------------------------------

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  // Equal neighbours return the exact value so ties stay unflagged.
  if (sorted[hi] == sorted[lo]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DetectorOutput make_output(std::vector<double> raw_scores, double threshold_raw) {
  if (raw_scores.empty()) throw DataError("cannot threshold an empty score sequence");
  DetectorOutput out;
  out.raw_scores = std::move(raw_scores);
  out.threshold_raw = threshold_raw;
  const auto [lo, hi] = std::minmax_element(out.raw_scores.begin(), out.raw_scores.end());
  out.score_min = *lo;
  out.score_max = *hi;
  const double range = out.score_max - out.score_min;
  auto scale = [&](double v) {
    return range > 0.0 ? std::clamp((v - out.score_min) / range, 0.0, 1.0) : 0.5;
  };
  out.scaled_scores.resize(out.raw_scores.size());
  out.labels.resize(out.raw_scores.size());
  for (std::size_t i = 0; i < out.raw_scores.size(); ++i) {
    if (!std::isfinite(out.raw_scores[i])) throw RuntimeFailure("non-finite anomaly score");
    out.scaled_scores[i] = scale(out.raw_scores[i]);
    out.labels[i] = out.raw_scores[i] > threshold_raw ? 1 : 0;
  }
  out.threshold_scaled = scale(threshold_raw);
  return out;
}

DetectorOutput threshold_scores(std::span<const double> raw_scores, double contamination) {
  if (raw_scores.empty()) throw DataError("cannot threshold an empty score sequence");
  if (!(contamination > 0.0 && contamination < 1.0)) {
    throw ConfigError(fmt::format("contamination must lie in (0, 1), got {}", contamination));
  }
  const double threshold = empirical_quantile(raw_scores, 1.0 - contamination);
  return make_output(std::vector<double>(raw_scores.begin(), raw_scores.end()), threshold);
}

// --- pool ------------------------------------------------------------------------

void ScoredPool::validate() const {
  if (kinds.size() != outputs.size()) throw DataError("pool kinds and outputs differ in size");
  validate_pool(kinds);
  if (timesteps.empty()) throw DataError("scored pool covers no timesteps");
  if (truth.size() != timesteps.size()) {
    throw DataError("scored pool ground truth does not cover every timestep");
  }
  for (const auto& out : outputs) {
    if (out.size() != timesteps.size() || out.labels.size() != timesteps.size() ||
        out.scaled_scores.size() != timesteps.size()) {
      throw DataError("detector output length differs from the pool length");
    }
  }
}

ScoredPool score_pool(const std::vector<const Detector*>& models, const data::TimeSeries& test,
                      double contamination) {
  if (!test.has_labels()) throw DataError("test series must carry ground-truth labels");
  std::size_t max_window = 1;
  for (const Detector* m : models) max_window = std::max(max_window, m->window_length());
  if (max_window > test.length()) {
    throw DataError(fmt::format("test series of {} rows is shorter than window {}",
                                test.length(), max_window));
  }
  ScoredPool pool;
  pool.contamination = contamination;
  const std::size_t start = max_window - 1;
  for (const Detector* m : models) {
    const auto windows = data::make_windows(test, m->window_length());
    const auto scores = m->score(windows);
    // scores[i] belongs to row i + W - 1; keep rows >= start.
    const std::size_t skip = start - (m->window_length() - 1);
    pool.kinds.push_back(m->kind());
    pool.outputs.push_back(threshold_scores(
        std::span<const double>(scores.data() + skip, scores.size() - skip), contamination));
  }
  pool.timesteps.assign(test.timestep_index().begin() + static_cast<std::ptrdiff_t>(start),
                        test.timestep_index().end());
  pool.truth.assign(test.labels()->begin() + static_cast<std::ptrdiff_t>(start),
                    test.labels()->end());
  pool.validate();
  return pool;
}

}  // namespace rlmsad::detect
