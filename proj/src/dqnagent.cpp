#include "rlmsad/dqnagent.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/exact_sum.hpp"

namespace rlmsad::dqn {

namespace {

std::vector<std::size_t> network_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                       std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Vector to_vector(const mdp::Observation& obs) {
  return Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
}

}  // namespace

void AgentConfig::validate() const {
  if (hidden.empty()) throw ConfigError("agent.hidden must list at least one layer");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("agent.hidden sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("agent.learning_rate must be positive");
  if (replay_capacity == 0 || batch_size == 0 || train_frequency == 0 ||
      target_sync_interval == 0 || total_steps == 0) {
    throw ConfigError(
        "agent replay_capacity, batch_size, train_frequency, target_sync_interval and "
        "total_steps must be positive");
  }
  if (batch_size > replay_capacity) {
    throw ConfigError("agent.batch_size cannot exceed agent.replay_capacity");
  }
  if (!(epsilon_final >= 0.0 && epsilon_final <= epsilon_start && epsilon_start <= 1.0)) {
    throw ConfigError("agent exploration needs 0 <= epsilon_final <= epsilon_start <= 1");
  }
  if (!(exploration_fraction > 0.0 && exploration_fraction <= 1.0)) {
    throw ConfigError("agent.exploration_fraction must lie in (0, 1]");
  }
  if (!(huber_delta > 0.0)) throw ConfigError("agent.huber_delta must be positive");
}

double AgentConfig::epsilon_at(std::size_t step) const {
  const double horizon = exploration_fraction * static_cast<double>(total_steps);
  const double progress = static_cast<double>(step) / horizon;
  if (progress >= 1.0) return epsilon_final;
  return epsilon_start + progress * (epsilon_final - epsilon_start);
}

nlohmann::json AgentConfig::to_json() const {
  return {{"hidden", hidden},
          {"learning_rate", learning_rate},
          {"replay_capacity", replay_capacity},
          {"batch_size", batch_size},
          {"warmup_steps", warmup_steps},
          {"train_frequency", train_frequency},
          {"target_sync_interval", target_sync_interval},
          {"epsilon_start", epsilon_start},
          {"epsilon_final", epsilon_final},
          {"exploration_fraction", exploration_fraction},
          {"huber_delta", huber_delta},
          {"total_steps", total_steps},
          {"seed", seed}};
}

// --- replay ----------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
  records_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(mdp::Transition transition) {
  if (records_.size() < capacity_) {
    records_.push_back(std::move(transition));
  } else {
    records_[next_] = std::move(transition);
  }
  next_ = (next_ + 1) % capacity_;
  ++pushed_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (records_.empty()) throw RuntimeFailure("cannot sample from an empty replay buffer");
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = uniform_index(rng, records_.size());
  return out;
}

// --- policy ----------------------------------------------------------------------

std::size_t act_greedy(std::span<const double> q_values) {
  if (q_values.empty()) throw RuntimeFailure("no Q-values to act on");
  std::size_t best = 0;
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    if (!std::isfinite(q_values[a])) throw RuntimeFailure("non-finite Q-value");
    if (q_values[a] > q_values[best]) best = a;
  }
  return best;
}

Policy::Policy(nn::DenseNetwork q_network, nlohmann::json metadata)
    : network_(std::move(q_network)), metadata_(std::move(metadata)) {}

Vector Policy::q_values(const mdp::Observation& observation) const {
  for (double v : observation) {
    if (!std::isfinite(v)) throw RuntimeFailure("non-finite observation");
  }
  return network_.forward_one(to_vector(observation));
}

std::size_t Policy::act(const mdp::Observation& observation) const {
  const Vector q = q_values(observation);
  return act_greedy(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

nlohmann::json Policy::to_json() const {
  return {{"format_version", 1}, {"network", network_.to_json()}, {"agent", metadata_}};
}

Policy Policy::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != 1) {
      throw DataError("unsupported policy format_version");
    }
    return Policy(nn::DenseNetwork::from_json(doc.at("network")),
                  doc.value("agent", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt policy document: {}", e.what()));
  }
}

// --- learner ---------------------------------------------------------------------

DqnLearner::DqnLearner(std::size_t observation_size, std::size_t action_count,
                       const AgentConfig& config)
    : online_(nn::DenseNetwork::initialize(
          network_sizes(observation_size, config.hidden, action_count),
          derive_seed(config.seed, 0x716e6574))),
      target_(online_),
      adam_(online_),
      learning_rate_(config.learning_rate),
      huber_delta_(config.huber_delta) {}

Vector DqnLearner::td_targets(std::span<const mdp::Transition* const> batch,
                              double gamma) const {
  const auto rows = static_cast<Eigen::Index>(batch.size());
  Matrix next(rows, static_cast<Eigen::Index>(online_.input_size()));
  for (Eigen::Index i = 0; i < rows; ++i) {
    next.row(i) = to_vector(batch[static_cast<std::size_t>(i)]->next_observation).transpose();
  }
  const Matrix q_next = target_.forward(next);
  Vector targets(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& tr = *batch[static_cast<std::size_t>(i)];
    const double bootstrap = tr.done ? 0.0 : q_next.row(i).maxCoeff();
    targets[i] = tr.reward + gamma * bootstrap;
  }
  return targets;
}

double DqnLearner::learn(std::span<const mdp::Transition* const> batch, double gamma) {
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const auto actions = static_cast<Eigen::Index>(online_.output_size());
  const Vector y = td_targets(batch, gamma);
  Matrix obs(rows, static_cast<Eigen::Index>(online_.input_size()));
  Matrix targets = Matrix::Zero(rows, actions);
  Matrix mask = Matrix::Zero(rows, actions);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& tr = *batch[static_cast<std::size_t>(i)];
    obs.row(i) = to_vector(tr.observation).transpose();
    const auto a = static_cast<Eigen::Index>(tr.action);
    targets(i, a) = y[i];
    mask(i, a) = 1.0;
  }
  const auto result = nn::backward(online_, obs, nn::Loss::huber(huber_delta_), targets, &mask);
  if (!std::isfinite(result.loss)) throw RuntimeFailure("non-finite DQN loss");
  nn::adam_step(online_, result.tape, learning_rate_, adam_);
  return result.loss;
}

// --- training loop -----------------------------------------------------------------

TrainResult train(const EnvFactory& make_env, const AgentConfig& config) {
  config.validate();
  std::unique_ptr<mdp::Environment> env = make_env();
  if (!env) throw ConfigError("environment factory returned nothing");
  const std::size_t obs_size = env->observation_size();
  const std::size_t actions = env->action_count();
  if (actions == 0) throw ConfigError("environment has no actions");

  DqnLearner learner(obs_size, actions, config);
  ReplayBuffer replay(config.replay_capacity);
  Rng explore_rng = make_rng(config.seed, 0x65787072);
  Rng sample_rng = make_rng(config.seed, 0x73616d70);
  TrainingStats stats;

  std::uint64_t episode = 0;
  mdp::Observation obs = env->reset(derive_seed(config.seed, episode));
  double episode_return = 0.0;
  std::vector<const mdp::Transition*> batch(config.batch_size);

  for (std::size_t step = 0; step < config.total_steps; ++step) {
    if (obs.size() != obs_size) {
      throw RuntimeFailure(fmt::format("observation length {} does not match network input {}",
                                       obs.size(), obs_size));
    }
    std::size_t action = 0;
    if (uniform01(explore_rng) < config.epsilon_at(step)) {
      action = uniform_index(explore_rng, actions);
    } else {
      const Vector q = learner.online().forward_one(to_vector(obs));
      action = act_greedy(std::span<const double>(q.data(), actions));
    }
    mdp::StepResult result = env->step(action);
    episode_return += result.reward;
    replay.push({obs, action, result.reward, result.observation, result.done, result.info});

    if (result.done) {
      stats.episode_returns.push_back(episode_return);
      episode_return = 0.0;
      obs = env->reset(derive_seed(config.seed, ++episode));
    } else {
      obs = std::move(result.observation);
    }

    const std::size_t done_steps = step + 1;
    if (done_steps > config.warmup_steps && done_steps % config.train_frequency == 0) {
      const auto idx = replay.sample_indices(config.batch_size, sample_rng);
      for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &replay.at(idx[i]);
      stats.last_loss = learner.learn(batch, env->gamma());
      if (!std::isfinite(stats.last_loss)) {
        throw RuntimeFailure(fmt::format("non-finite loss at step {}", done_steps));
      }
      ++stats.gradient_steps;
    }
    if (done_steps % config.target_sync_interval == 0) {
      learner.sync_target();
      ++stats.target_syncs;
    }
  }
  stats.total_steps = config.total_steps;
  spdlog::debug("dqn: {} steps, {} episodes, {} gradient steps, last loss {:.4f}",
                stats.total_steps, stats.episode_returns.size(), stats.gradient_steps,
                stats.last_loss);

  nlohmann::json metadata = {{"config", config.to_json()},
                             {"observation_size", obs_size},
                             {"action_count", actions}};
  return {Policy(learner.online(), std::move(metadata)), std::move(stats)};
}

EpisodeTrace evaluate_policy(const Policy& policy, mdp::Environment& env) {
  if (policy.network().input_size() != env.observation_size() ||
      policy.network().output_size() != env.action_count()) {
    throw ConfigError(fmt::format(
        "policy network {}->{} does not fit environment with {} observations and {} actions",
        policy.network().input_size(), policy.network().output_size(), env.observation_size(),
        env.action_count()));
  }
  EpisodeTrace trace;
  ExactSum total;
  mdp::Observation obs = env.reset(0);
  while (true) {
    const std::size_t action = policy.act(obs);
    mdp::StepResult result = env.step(action);
    total.add(result.reward);
    trace.transitions.push_back(
        {obs, action, result.reward, result.observation, result.done, result.info});
    if (result.done) break;
    obs = std::move(result.observation);
  }
  trace.episode_return = total.value();
  return trace;
}

}  // namespace rlmsad::dqn
