#include "rlmsad/mdpenv.hpp"

#include <fmt/format.h>

#include "rlmsad/confidence.hpp"
#include "rlmsad/errors.hpp"

namespace rlmsad::mdp {

FeatureMask FeatureMask::without(StateFeature feature) {
  FeatureMask mask;
  mask.keep_.reset(static_cast<std::size_t>(feature));
  return mask;
}

FeatureMask FeatureMask::parse(const std::string& name) {
  if (name == "full") return full();
  if (name == "drop_dt") return without(StateFeature::kDistanceToThreshold);
  if (name == "drop_pc") return without(StateFeature::kPredictionConsensus);
  throw ConfigError(fmt::format("unknown feature mask '{}' (expected full, drop_dt, drop_pc)",
                                name));
}

std::string FeatureMask::name() const {
  if (keep_.all()) return "full";
  if (*this == without(StateFeature::kDistanceToThreshold)) return "drop_dt";
  if (*this == without(StateFeature::kPredictionConsensus)) return "drop_pc";
  return fmt::format("mask_{}", keep_.to_string());
}

Observation FeatureMask::apply(const StateVector& state) const {
  Observation obs;
  obs.reserve(size());
  for (std::size_t i = 0; i < kStateFeatures; ++i) {
    if (keep_.test(i)) obs.push_back(state[i]);
  }
  return obs;
}

double RewardConfig::reward(int prediction, int truth) const {
  if (prediction == 1) return truth == 1 ? tp : -fp;
  return truth == 1 ? -fn : tn;
}

std::vector<std::string> validate_reward_config(const RewardConfig& config) {
  std::vector<std::string> violations;
  if (!(config.tp > 0.0 && config.tn > 0.0 && config.fp > 0.0 && config.fn > 0.0)) {
    violations.push_back("r1, r2, r3, r4 > 0");
  }
  if (!(config.tp > config.tn)) violations.push_back("r1 > r2");
  if (!(config.fn > config.fp)) violations.push_back("r4 > r3");
  return violations;
}

DetectorSelectionEnv::DetectorSelectionEnv(std::shared_ptr<const detect::ScoredPool> pool,
                                           RewardConfig rewards, FeatureMask mask)
    : pool_(std::move(pool)), rewards_(rewards), mask_(mask) {
  if (!pool_) throw ConfigError("environment needs a scored pool");
  if (pool_->length() == 0) throw DataError("environment needs a non-empty test sequence");
  if (pool_->size() < 2) throw ConfigError("environment needs a pool of at least 2 detectors");
  pool_->validate();
  if (const auto violations = validate_reward_config(rewards_); !violations.empty()) {
    throw ConfigError(fmt::format("reward config violates {}", violations.front()));
  }
  if (mask_.size() == 0) throw ConfigError("feature mask removes every state component");
  positives_.assign(pool_->length(), 0);
  for (const auto& out : pool_->outputs) {
    for (std::size_t t = 0; t < pool_->length(); ++t) positives_[t] += out.labels[t];
  }
}

StateVector DetectorSelectionEnv::state(std::size_t detector, std::size_t t) const {
  const auto& out = pool_->outputs[detector];
  const int label = out.labels[t];
  const int m = static_cast<int>(pool_->size());
  const int agree = label == 1 ? positives_[t] : m - positives_[t];
  return {out.scaled_scores[t], out.threshold_scaled, static_cast<double>(label),
          confidence::distance_to_threshold(out.raw_scores[t], out.threshold_raw,
                                            out.score_max, out.score_min),
          static_cast<double>(agree) / static_cast<double>(m)};
}

Observation DetectorSelectionEnv::reset(std::uint64_t /*seed*/) {
  cursor_ = 0;
  selected_ = 0;
  episode_return_.clear();
  done_ = false;
  return mask_.apply(state(selected_, cursor_));
}

StepResult DetectorSelectionEnv::step(std::size_t action) {
  if (done_) throw RuntimeFailure("step called on a finished episode; call reset first");
  if (action >= pool_->size()) {
    throw RuntimeFailure(
        fmt::format("action {} outside pool of {} detectors", action, pool_->size()));
  }
  StepResult result;
  result.info.timestep = cursor_;
  result.info.prediction = pool_->outputs[action].labels[cursor_];
  result.info.truth = pool_->truth[cursor_];
  result.reward = rewards_.reward(result.info.prediction, result.info.truth);
  episode_return_.add(result.reward);
  selected_ = action;
  cursor_ += 1;
  done_ = cursor_ == pool_->length();
  result.done = done_;
  // The terminal observation repeats the last timestep; it is never bootstrapped.
  result.observation = mask_.apply(state(selected_, done_ ? cursor_ - 1 : cursor_));
  return result;
}

}  // namespace rlmsad::mdp
