#ifndef RLMSAD_CONFIDENCE_HPP_
#define RLMSAD_CONFIDENCE_HPP_

#include <span>
#include <vector>

#include "rlmsad/detectors.hpp"

namespace rlmsad::confidence {

// (score - threshold) / (score_max - score_min); 0 when the range is empty.
double distance_to_threshold(double score, double threshold, double score_max,
                             double score_min);

// Fraction of pool members whose label equals `my_label`, the selected
// detector included.
double prediction_consensus(std::span<const int> labels, int my_label);

// One pool member's outputs at a single timestep.
struct DetectorView {
  double scaled_score = 0.0;
  double scaled_threshold = 0.0;
  int label = 0;
  double raw_score = 0.0;
  double raw_threshold = 0.0;
  double raw_min = 0.0;
  double raw_max = 0.0;
};

struct PoolSnapshot {
  std::vector<DetectorView> members;

  static PoolSnapshot at(const detect::ScoredPool& pool, std::size_t t);
  std::vector<int> labels() const;
};

}  // namespace rlmsad::confidence

#endif  // RLMSAD_CONFIDENCE_HPP_
