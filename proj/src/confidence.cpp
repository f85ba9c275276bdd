#include "rlmsad/confidence.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rlmsad/errors.hpp"

namespace rlmsad::confidence {

double distance_to_threshold(double score, double threshold, double score_max,
                             double score_min) {
  if (!std::isfinite(score) || !std::isfinite(threshold) || !std::isfinite(score_max) ||
      !std::isfinite(score_min)) {
    throw DataError("distance_to_threshold needs finite inputs");
  }
  if (score_max < score_min) throw DataError("distance_to_threshold: score_max < score_min");
  const double range = score_max - score_min;
  if (range == 0.0) return 0.0;
  return std::clamp((score - threshold) / range, -1.0, 1.0);
}

double prediction_consensus(std::span<const int> labels, int my_label) {
  if (labels.empty()) throw DataError("prediction_consensus needs a non-empty pool");
  const auto agree = std::count(labels.begin(), labels.end(), my_label);
  return static_cast<double>(agree) / static_cast<double>(labels.size());
}

PoolSnapshot PoolSnapshot::at(const detect::ScoredPool& pool, std::size_t t) {
  if (t >= pool.length()) {
    throw DataError(fmt::format("timestep {} outside pool of length {}", t, pool.length()));
  }
  PoolSnapshot snap;
  snap.members.reserve(pool.size());
  for (const auto& out : pool.outputs) {
    snap.members.push_back({out.scaled_scores[t], out.threshold_scaled, out.labels[t],
                            out.raw_scores[t], out.threshold_raw, out.score_min,
                            out.score_max});
  }
  return snap;
}

std::vector<int> PoolSnapshot::labels() const {
  std::vector<int> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.label);
  return out;
}

}  // namespace rlmsad::confidence
