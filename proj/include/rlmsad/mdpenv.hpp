#ifndef RLMSAD_MDPENV_HPP_
#define RLMSAD_MDPENV_HPP_

#include <array>
#include <bitset>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rlmsad/detectors.hpp"
#include "rlmsad/exact_sum.hpp"

namespace rlmsad::mdp {

using Observation = std::vector<double>;

// Order of the state components before masking.
enum class StateFeature {
  kScaledScore = 0,
  kScaledThreshold = 1,
  kPredictedLabel = 2,
  kDistanceToThreshold = 3,
  kPredictionConsensus = 4,
};
inline constexpr std::size_t kStateFeatures = 5;

using StateVector = std::array<double, kStateFeatures>;

// Selects which state components are observed. Masked components are
// removed, so the observation shrinks.
class FeatureMask {
 public:
  FeatureMask() : keep_((1u << kStateFeatures) - 1) {}

  static FeatureMask full() { return {}; }
  static FeatureMask without(StateFeature feature);
  // "full", "drop_dt", "drop_pc".
  static FeatureMask parse(const std::string& name);

  bool keeps(StateFeature feature) const { return keep_.test(static_cast<std::size_t>(feature)); }
  std::size_t size() const { return keep_.count(); }
  Observation apply(const StateVector& state) const;
  std::string name() const;

  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

 private:
  std::bitset<kStateFeatures> keep_;
};

// Reward magnitudes: +tp, +tn, -fp, -fn.
struct RewardConfig {
  double tp = 1.0;
  double tn = 0.1;
  double fp = 0.4;
  double fn = 1.5;

  double reward(int prediction, int truth) const;
};

// Empty when the config satisfies r1 > r2, r4 > r3 and positivity; otherwise
// one message per violated constraint, naming the inequality.
std::vector<std::string> validate_reward_config(const RewardConfig& config);

struct StepInfo {
  int prediction = -1;
  int truth = -1;
  std::size_t timestep = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Gym-style episodic environment with a discrete action space.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual double gamma() const { return 1.0; }
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::size_t action) = 0;
};

struct Transition {
  Observation observation;
  std::size_t action = 0;
  double reward = 0.0;
  Observation next_observation;
  bool done = false;
  StepInfo info;
};

// Detector-selection MDP over a pre-scored pool. The observation at cursor t
// is the state vector of the detector chosen at the previous step, evaluated
// at t; the action picks the detector whose label is the prediction for t and
// becomes the observation source for t+1. Transitions follow time order and
// the return is undiscounted.
class DetectorSelectionEnv final : public Environment {
 public:
  DetectorSelectionEnv(std::shared_ptr<const detect::ScoredPool> pool, RewardConfig rewards,
                       FeatureMask mask = FeatureMask::full());

  std::size_t observation_size() const override { return mask_.size(); }
  std::size_t action_count() const override { return pool_->size(); }
  Observation reset(std::uint64_t seed = 0) override;
  StepResult step(std::size_t action) override;

  // Unmasked state of `detector` at pool timestep t.
  StateVector state(std::size_t detector, std::size_t t) const;

  std::size_t episode_length() const { return pool_->length(); }
  std::size_t cursor() const { return cursor_; }
  std::size_t selected_detector() const { return selected_; }
  double episode_return() const { return episode_return_.value(); }
  bool done() const { return done_; }
  const RewardConfig& rewards() const { return rewards_; }
  const FeatureMask& mask() const { return mask_; }
  const detect::ScoredPool& pool() const { return *pool_; }

 private:
  std::shared_ptr<const detect::ScoredPool> pool_;
  RewardConfig rewards_;
  FeatureMask mask_;
  // Number of detectors flagging each timestep.
  std::vector<int> positives_;
  std::size_t cursor_ = 0;
  std::size_t selected_ = 0;
  ExactSum episode_return_;
  bool done_ = true;
};

}  // namespace rlmsad::mdp

#endif  // RLMSAD_MDPENV_HPP_
