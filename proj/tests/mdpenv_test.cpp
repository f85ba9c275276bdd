#include <memory>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"
#include "rlmsad/mdpenv.hpp"
#include "test_util.hpp"

namespace rlmsad::mdp {
namespace {

const RewardConfig kDefaultRewards{1.0, 0.1, 0.4, 1.5};

std::shared_ptr<const detect::ScoredPool> shared(detect::ScoredPool pool) {
  return std::make_shared<const detect::ScoredPool>(std::move(pool));
}

StateVector expected_state(const detect::ScoredPool& pool, std::size_t d, std::size_t t) {
  const auto& o = pool.outputs[d];
  std::vector<int> labels;
  for (const auto& m : pool.outputs) labels.push_back(m.labels[t]);
  return {o.scaled_scores[t], o.threshold_scaled, static_cast<double>(o.labels[t]),
          oracle::distance_to_threshold(o.raw_scores[t], o.threshold_raw, o.score_max, o.score_min),
          oracle::consensus(labels, d)};
}

TEST(Rewards, DefaultSettingCases) {
  EXPECT_EQ(kDefaultRewards.reward(1, 1), 1.0);
  EXPECT_EQ(kDefaultRewards.reward(0, 0), 0.1);
  EXPECT_EQ(kDefaultRewards.reward(1, 0), -0.4);
  EXPECT_EQ(kDefaultRewards.reward(0, 1), -1.5);
}

TEST(Rewards, ValidationNamesTheViolatedInequality) {
  EXPECT_TRUE(validate_reward_config(kDefaultRewards).empty());
  const auto a = validate_reward_config({0.1, 1.0, 0.4, 1.5});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_NE(a[0].find("r1 > r2"), std::string::npos);
  const auto b = validate_reward_config({1.0, 0.1, 2.0, 1.5});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NE(b[0].find("r4 > r3"), std::string::npos);
  EXPECT_FALSE(validate_reward_config({1.0, -0.1, 0.4, 1.5}).empty());
  EXPECT_EQ(validate_reward_config({0.1, 1.0, 2.0, 1.5}).size(), 2u);
}

TEST(Mask, ShapesAndNames) {
  EXPECT_EQ(FeatureMask::parse("full").size(), 5u);
  EXPECT_EQ(FeatureMask::parse("drop_pc").size(), 4u);
  EXPECT_EQ(FeatureMask::parse("drop_dt").size(), 4u);
  EXPECT_EQ(FeatureMask::parse("drop_dt").name(), "drop_dt");
  EXPECT_THROW(FeatureMask::parse("drop_everything"), ConfigError);
  const StateVector s{0.1, 0.2, 1.0, 0.3, 0.4};
  EXPECT_EQ(FeatureMask::parse("drop_pc").apply(s), (Observation{0.1, 0.2, 1.0, 0.3}));
  EXPECT_EQ(FeatureMask::parse("drop_dt").apply(s), (Observation{0.1, 0.2, 1.0, 0.4}));
}

TEST(Environment, ResetObservesDetectorZeroAtStart) {
  Rng rng = make_rng(1);
  const auto pool = shared(testing::random_pool(rng, 3, 20));
  DetectorSelectionEnv env(pool, kDefaultRewards);
  const auto obs = env.reset(0);
  EXPECT_EQ(env.cursor(), 0u);
  EXPECT_EQ(env.episode_return(), 0.0);
  EXPECT_EQ(env.selected_detector(), 0u);
  const auto s = expected_state(*pool, 0, 0);
  EXPECT_EQ(obs, Observation(s.begin(), s.end()));
  EXPECT_EQ(env.reset(5), obs);
  EXPECT_EQ(env.gamma(), 1.0);
  DetectorSelectionEnv masked(pool, kDefaultRewards, FeatureMask::parse("drop_pc"));
  EXPECT_EQ(masked.reset(0).size(), 4u);
  EXPECT_EQ(masked.observation_size(), 4u);
}

TEST(Environment, AlwaysCorrectThreeStepEpisode) {
  // Detector 0 flags only the last step, matching truth [0, 0, 1].
  const auto pool = shared(testing::make_pool({{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}}, {0, 0, 1}));
  ASSERT_EQ(pool->outputs[0].labels, (Labels{0, 0, 1}));
  DetectorSelectionEnv env(pool, kDefaultRewards);
  env.reset(0);
  double total = 0.0;
  for (int t = 0; t < 3; ++t) {
    const auto r = env.step(0);
    total += r.reward;
    EXPECT_EQ(r.done, t == 2);
  }
  EXPECT_NEAR(total, 1.2, 1e-15);
  EXPECT_EQ(env.episode_return(), 1.2);
  EXPECT_THROW(env.step(0), RuntimeFailure);
}

TEST(Environment, RejectsBadActionsAndConfigs) {
  Rng rng = make_rng(2);
  const auto pool = shared(testing::random_pool(rng, 2, 10));
  DetectorSelectionEnv env(pool, kDefaultRewards);
  env.reset(0);
  EXPECT_THROW(env.step(2), Error);
  EXPECT_THROW(DetectorSelectionEnv(pool, {0.1, 1.0, 0.4, 1.5}), ConfigError);
  Rng rng1 = make_rng(3);
  auto single = testing::random_pool(rng1, 2, 10);
  single.kinds.pop_back();
  single.outputs.pop_back();
  EXPECT_THROW(DetectorSelectionEnv(shared(single), kDefaultRewards), ConfigError);
}

// Random pools and random action sequences against hand bookkeeping.
TEST(Environment, RandomEpisodesMatchBruteForceAccounting) {
  Rng rng = make_rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + uniform_index(rng, 4);
    const std::size_t n = 1 + uniform_index(rng, 120);
    const auto pool = shared(testing::random_pool(rng, m, n));
    const RewardConfig rewards{1.0 + uniform01(rng), uniform01(rng), 0.1 + uniform01(rng),
                               1.2 + uniform01(rng)};
    const auto mask = FeatureMask::parse(trial % 3 == 0 ? "full" : trial % 3 == 1 ? "drop_pc" : "drop_dt");
    DetectorSelectionEnv env(pool, rewards, mask);
    auto obs = env.reset(0);
    std::vector<int> predictions;
    std::vector<double> observed_rewards;
    std::size_t previous = 0;
    std::size_t steps = 0;
    bool done = false;
    while (!done) {
      const auto s = expected_state(*pool, previous, steps);
      ASSERT_EQ(obs, mask.apply(s)) << "trial " << trial << " t " << steps;
      EXPECT_GE(s[3], -1.0);
      EXPECT_LE(s[3], 1.0);
      EXPECT_GT(s[4], 0.0);
      const std::size_t action = uniform_index(rng, m);
      const auto r = env.step(action);
      const int pred = pool->outputs[action].labels[steps];
      EXPECT_EQ(r.info.prediction, pred);
      EXPECT_EQ(r.info.truth, pool->truth[steps]);
      EXPECT_EQ(r.reward, oracle::reward(pred, pool->truth[steps], rewards.tp, rewards.tn,
                                         rewards.fp, rewards.fn));
      predictions.push_back(pred);
      observed_rewards.push_back(r.reward);
      obs = r.observation;
      previous = action;
      done = r.done;
      ++steps;
    }
    EXPECT_EQ(steps, n);
    const auto c = oracle::count(predictions, pool->truth);
    // Exact comparison against the independently rounded closed form.
    const eval::ConfusionCounts counts{static_cast<std::size_t>(c.tp), static_cast<std::size_t>(c.tn),
                                       static_cast<std::size_t>(c.fp), static_cast<std::size_t>(c.fn)};
    EXPECT_EQ(env.episode_return(), eval::confusion_return(counts, rewards));
    double naive = 0.0;
    for (double r : observed_rewards) naive += r;
    EXPECT_NEAR(env.episode_return(), naive, 1e-9);
  }
}

TEST(Environment, ReplayIsBitwiseIdentical) {
  Rng rng = make_rng(5);
  const auto pool = shared(testing::random_pool(rng, 3, 40));
  std::vector<std::size_t> actions(40);
  for (auto& a : actions) a = uniform_index(rng, 3);
  auto run = [&] {
    DetectorSelectionEnv env(pool, kDefaultRewards);
    std::vector<Observation> seen{env.reset(0)};
    std::vector<double> rewards;
    for (auto a : actions) {
      auto r = env.step(a);
      seen.push_back(r.observation);
      rewards.push_back(r.reward);
    }
    return std::make_pair(seen, rewards);
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace rlmsad::mdp
