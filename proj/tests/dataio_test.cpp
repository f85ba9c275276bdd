#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "rlmsad/dataio.hpp"
#include "rlmsad/errors.hpp"
#include "test_util.hpp"

namespace rlmsad::data {
namespace {

using rlmsad::testing::TempDir;
using rlmsad::testing::write_file;

TimeSeries ramp(std::size_t t, std::size_t d, std::optional<Labels> labels = std::nullopt) {
  Matrix values(t, d);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < d; ++j) values(i, j) = static_cast<double>(i * 10 + j);
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return TimeSeries(values, names, std::move(labels));
}

TEST(LoadCsv, PlainFeatures) {
  TempDir dir;
  write_file(dir / "a.csv", "x,y\n1,2\n3,4\n5,6\n");
  const auto s = load_csv(dir / "a.csv");
  EXPECT_EQ(s.length(), 3u);
  EXPECT_EQ(s.dims(), 2u);
  EXPECT_FALSE(s.has_labels());
  EXPECT_DOUBLE_EQ(s.values()(2, 1), 6.0);
}

TEST(LoadCsv, LabelColumnIsSplitOff) {
  TempDir dir;
  write_file(dir / "a.csv", "x,attack,y\n1,0,2\n3,1,4\n5,0,6\n");
  const auto s = load_csv(dir / "a.csv", std::string("attack"));
  EXPECT_EQ(s.dims(), 2u);
  ASSERT_TRUE(s.has_labels());
  EXPECT_EQ(*s.labels(), (Labels{0, 1, 0}));
  EXPECT_EQ(s.feature_names(), (std::vector<std::string>{"x", "y"}));
}

TEST(LoadCsv, RejectsNaNWithPosition) {
  TempDir dir;
  write_file(dir / "a.csv", "x,y\n1,2\n3,NaN\n");
  try {
    load_csv(dir / "a.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("row 3"), std::string::npos) << what;
    EXPECT_NE(what.find("column 2"), std::string::npos) << what;
  }
}

TEST(LoadCsv, RejectsRaggedRowsBadLabelsAndMissingFile) {
  TempDir dir;
  write_file(dir / "ragged.csv", "x,y\n1,2\n3\n");
  EXPECT_THROW(load_csv(dir / "ragged.csv"), DataError);
  write_file(dir / "label.csv", "x,label\n1,0\n3,2\n");
  EXPECT_THROW(load_csv(dir / "label.csv", std::string("label")), DataError);
  write_file(dir / "text.csv", "x,y\n1,abc\n");
  EXPECT_THROW(load_csv(dir / "text.csv"), DataError);
  EXPECT_THROW(load_csv(dir / "missing.csv"), DataError);
}

TEST(LoadCsv, WriteThenLoadRoundTrips) {
  TempDir dir;
  Rng rng = make_rng(3);
  Matrix values(7, 3);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = standard_normal(rng);
  const TimeSeries s(values, {"a", "b", "c"}, Labels{0, 1, 0, 0, 1, 1, 0});
  write_csv(s, dir / "s.csv");
  const auto back = load_csv(dir / "s.csv", std::string("label"));
  EXPECT_EQ(back.values(), s.values());
  EXPECT_EQ(*back.labels(), *s.labels());
}

TEST(TimeSeries, RejectsMismatchedLabels) {
  Matrix values = Matrix::Zero(3, 2);
  EXPECT_THROW(TimeSeries(values, {"a", "b"}, Labels{0, 1}), DataError);
  EXPECT_THROW(TimeSeries(values, {"a", "b"}, Labels{0, 1, 2}), DataError);
  values(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(TimeSeries(values, {"a", "b"}), DataError);
}

TEST(Downsample, BlockMeansAndOrLabels) {
  const auto s = ramp(10, 2, Labels{0, 0, 0, 0, 1, 0, 0, 0, 0, 0});
  const auto d = downsample(s, 5);
  ASSERT_EQ(d.length(), 2u);
  EXPECT_DOUBLE_EQ(d.values()(0, 0), (0 + 10 + 20 + 30 + 40) / 5.0);
  EXPECT_DOUBLE_EQ(d.values()(1, 1), (51 + 61 + 71 + 81 + 91) / 5.0);
  EXPECT_EQ(*d.labels(), (Labels{1, 0}));
}

TEST(Downsample, IdentityAndZeroBlock) {
  const auto s = ramp(6, 2);
  EXPECT_EQ(downsample(s, 1).values(), s.values());
  EXPECT_THROW(downsample(s, 0), ConfigError);
}

TEST(Downsample, LengthIsFloorForEveryBlock) {
  for (std::size_t t = 1; t <= 23; ++t) {
    const auto s = ramp(t, 1);
    for (std::size_t b = 1; b <= t; ++b) {
      EXPECT_EQ(downsample(s, b).length(), t / b) << "T=" << t << " b=" << b;
    }
  }
}

TEST(MakeWindows, CountsAndTargets) {
  const auto w = make_windows(ramp(5, 2), 3);
  EXPECT_EQ(w.size(), 3u);
  EXPECT_EQ(w.targets_index, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(make_windows(ramp(5, 2), 1).size(), 5u);
  EXPECT_EQ(make_windows(ramp(4, 2), 2).flattened_dim(), 4u);
  EXPECT_THROW(make_windows(ramp(4, 2), 5), DataError);
}

TEST(MakeWindows, LastRowOfEachWindowReproducesTheSeries) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t t = 5 + uniform_index(rng, 40);
    const std::size_t d = 1 + uniform_index(rng, 4);
    const std::size_t w = 1 + uniform_index(rng, t);
    Matrix values(t, d);
    for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = standard_normal(rng);
    const TimeSeries s(values, std::vector<std::string>(d, "f"), testing::random_labels(rng, t));
    const auto win = make_windows(s, w);
    ASSERT_EQ(win.size(), t - w + 1);
    for (std::size_t i = 0; i < win.size(); ++i) {
      const std::size_t target = win.targets_index[i];
      EXPECT_EQ(target, i + w - 1);
      for (std::size_t j = 0; j < d; ++j) {
        EXPECT_EQ(win.windows(i, (w - 1) * d + j), values(target, j));
        // Oldest row first.
        EXPECT_EQ(win.windows(i, j), values(i, j));
      }
      EXPECT_EQ((*win.target_labels)[i], (*s.labels())[target]);
    }
  }
}

TEST(Scaler, MidpointConstantAndClamp) {
  Matrix train(2, 2);
  train << 2.0, 5.0, 4.0, 5.0;
  const auto scaler = fit_scaler(TimeSeries(train, {"a", "b"}));
  Matrix probe(3, 2);
  probe << 3.0, 5.0, 2.0 - 0.2 * 2.0, 9.0, 100.0, -3.0;
  const Matrix out = scaler.apply(probe);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(out(1, 0), -0.05);
  EXPECT_DOUBLE_EQ(out(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(out(2, 0), 1.05);
}

TEST(Scaler, InvertRecoversInRangeInputs) {
  Rng rng = make_rng(5);
  Matrix train(50, 4);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = 100.0 * standard_normal(rng);
  const auto scaler = fit_scaler(TimeSeries(train, std::vector<std::string>(4, "f")));
  const Matrix back = scaler.invert(scaler.apply(train));
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    EXPECT_NEAR(back.data()[i], train.data()[i], 1e-9 * std::max(1.0, std::abs(train.data()[i])));
  }
}

TEST(Scaler, ApplyTwiceEqualsOnceOnUnitRange) {
  Rng rng = make_rng(6);
  Matrix train(40, 3);
  for (Eigen::Index i = 0; i < train.size(); ++i) train.data()[i] = uniform01(rng);
  train.row(0).setZero();
  train.row(1).setOnes();
  const auto scaler = fit_scaler(TimeSeries(train, std::vector<std::string>(3, "f")));
  Matrix probe(30, 3);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = 3.0 * uniform01(rng) - 1.0;
  const Matrix once = scaler.apply(probe);
  const Matrix twice = scaler.apply(once);
  EXPECT_LE((twice - once).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Scaler, JsonRoundTrip) {
  const FeatureScaler scaler(Vector::Constant(2, -1.0), Vector::Constant(2, 3.0));
  const auto back = FeatureScaler::from_json(scaler.to_json());
  EXPECT_EQ(back.minimum(), scaler.minimum());
  EXPECT_EQ(back.maximum(), scaler.maximum());
}

TEST(Synthetic, RateAndDeterminism) {
  SynthConfig config;
  const auto a = generate_synthetic(config, 7);
  const auto b = generate_synthetic(config, 7);
  const auto c = generate_synthetic(config, 8);
  const auto& labels = *a.test.labels();
  const int sum = std::accumulate(labels.begin(), labels.end(), 0);
  EXPECT_GE(sum, 550);
  EXPECT_LE(sum, 650);
  EXPECT_EQ(a.train.values(), b.train.values());
  EXPECT_EQ(a.test.values(), b.test.values());
  EXPECT_EQ(*a.test.labels(), *b.test.labels());
  EXPECT_NE(a.test.values(), c.test.values());
}

TEST(Synthetic, TrainIsCleanAndAllProfilesPresent) {
  const auto ds = generate_synthetic(SynthConfig{}, 7);
  if (ds.train.has_labels()) {
    for (int v : *ds.train.labels()) EXPECT_EQ(v, 0);
  }
  std::set<int> profiles;
  const auto& labels = *ds.test.labels();
  for (std::size_t t = 0; t < labels.size(); ++t) {
    EXPECT_EQ(labels[t] == 1, ds.test_profile[t] >= 0);
    if (ds.test_profile[t] >= 0) profiles.insert(ds.test_profile[t]);
  }
  EXPECT_EQ(profiles.size(), 3u);
}

TEST(Synthetic, RateHoldsForRandomConfigs) {
  Rng rng = make_rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    SynthConfig config;
    config.t_train = 500 + uniform_index(rng, 1500);
    config.t_test = 1000 + uniform_index(rng, 3000);
    config.d = 2 + uniform_index(rng, 8);
    config.anomaly_rate = 0.03 + 0.3 * uniform01(rng);
    const auto ds = generate_synthetic(config, rng());
    const auto& labels = *ds.test.labels();
    const double rate =
        std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
    EXPECT_NEAR(rate, config.anomaly_rate, 0.01)
        << "t_test=" << config.t_test << " d=" << config.d;
    EXPECT_EQ(ds.test.dims(), config.d);
  }
}

TEST(Synthetic, RejectsInvalidConfigs) {
  SynthConfig config;
  config.anomaly_rate = 0.9;
  EXPECT_THROW(generate_synthetic(config, 1), ConfigError);
  config.anomaly_rate = 0.0;
  EXPECT_THROW(generate_synthetic(config, 1), ConfigError);
  config = SynthConfig{};
  config.d = 1;
  EXPECT_THROW(generate_synthetic(config, 1), ConfigError);
}

TEST(Synthetic, ConfigFileAndSegmentPlan) {
  TempDir dir;
  write_file(dir / "synth.ini",
             "t_train = 800\nt_test = 1200\nd = 4\nanomaly_rate = 0.1\n"
             "segment_plan = spike:2,drift:1\nseed = 3\n");
  const auto config = load_synth_config(dir / "synth.ini");
  EXPECT_EQ(config.t_train, 800u);
  EXPECT_EQ(config.d, 4u);
  EXPECT_EQ(config.seed, 3u);
  ASSERT_EQ(config.segment_plan.size(), 2u);
  EXPECT_EQ(format_segment_plan(config.segment_plan), "spike:2,drift:1");
  EXPECT_THROW(parse_segment_plan("spike:1,wobble:1"), ConfigError);
}

}  // namespace
}  // namespace rlmsad::data
