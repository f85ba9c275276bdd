#ifndef RLMSAD_DQNAGENT_HPP_
#define RLMSAD_DQNAGENT_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlmsad/mdpenv.hpp"
#include "rlmsad/neuralcore.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::dqn {

struct AgentConfig {
  std::vector<std::size_t> hidden = {64, 64};
  double learning_rate = 1e-4;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 32;
  std::size_t warmup_steps = 1000;
  std::size_t train_frequency = 4;
  std::size_t target_sync_interval = 2000;
  double epsilon_start = 1.0;
  double epsilon_final = 0.05;
  double exploration_fraction = 0.1;
  double huber_delta = 1.0;
  std::size_t total_steps = 50000;
  std::uint64_t seed = 0;

  void validate() const;
  // Linearly annealed over the first exploration_fraction of total_steps.
  double epsilon_at(std::size_t step) const;
  nlohmann::json to_json() const;
};

// Fixed-capacity ring buffer; once full, the oldest record is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(mdp::Transition transition);
  // Uniform draw with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  const mdp::Transition& at(std::size_t i) const { return records_[i]; }
  std::uint64_t total_pushed() const { return pushed_; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<mdp::Transition> records_;
};

// argmax with lowest-index tie breaking.
std::size_t act_greedy(std::span<const double> q_values);

// Greedy policy over a Q-network, plus metadata echoed into the policy file.
class Policy {
 public:
  Policy(nn::DenseNetwork q_network, nlohmann::json metadata = nlohmann::json::object());

  std::size_t act(const mdp::Observation& observation) const;
  Vector q_values(const mdp::Observation& observation) const;

  const nn::DenseNetwork& network() const { return network_; }
  const nlohmann::json& metadata() const { return metadata_; }
  nlohmann::json& metadata() { return metadata_; }

  nlohmann::json to_json() const;
  static Policy from_json(const nlohmann::json& doc);

 private:
  nn::DenseNetwork network_;
  nlohmann::json metadata_;
};

struct TrainingStats {
  std::vector<double> episode_returns;
  std::size_t total_steps = 0;
  std::size_t gradient_steps = 0;
  std::size_t target_syncs = 0;
  double last_loss = 0.0;
};

// Online/target network pair with the Bellman regression step exposed so the
// target computation can be checked in isolation.
class DqnLearner {
 public:
  DqnLearner(std::size_t observation_size, std::size_t action_count, const AgentConfig& config);

  // r + gamma (1 - done) max_a' Q_target(s', a'), one row per transition.
  Vector td_targets(std::span<const mdp::Transition* const> batch, double gamma) const;
  // One Huber-regression step of Q_online(s, a) toward the TD targets.
  double learn(std::span<const mdp::Transition* const> batch, double gamma);
  void sync_target() { target_ = online_; }

  const nn::DenseNetwork& online() const { return online_; }
  const nn::DenseNetwork& target() const { return target_; }
  nn::DenseNetwork& online() { return online_; }
  nn::DenseNetwork& target() { return target_; }

 private:
  nn::DenseNetwork online_;
  nn::DenseNetwork target_;
  nn::AdamState adam_;
  double learning_rate_;
  double huber_delta_;
};

using EnvFactory = std::function<std::unique_ptr<mdp::Environment>()>;

struct TrainResult {
  Policy policy;
  TrainingStats stats;
};

TrainResult train(const EnvFactory& make_env, const AgentConfig& config);

struct EpisodeTrace {
  std::vector<mdp::Transition> transitions;
  double episode_return = 0.0;
};

// One greedy pass without exploration; resets the environment first.
EpisodeTrace evaluate_policy(const Policy& policy, mdp::Environment& env);

}  // namespace rlmsad::dqn

#endif  // RLMSAD_DQNAGENT_HPP_
