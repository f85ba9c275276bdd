#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/detectors.hpp"
#include "test_util.hpp"

namespace rlmsad::detect {
namespace {

data::WindowedDataset instances(const Matrix& values) {
  data::WindowedDataset ds;
  ds.windows = values;
  ds.window_length = 1;
  ds.dims = static_cast<std::size_t>(values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) ds.targets_index.push_back(i);
  return ds;
}

Matrix gaussian(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

// Heavy-tailed columns with mixed skew directions.
Matrix skewed(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double e = -std::log(1.0 - uniform01(rng));
      m(i, j) = j % 2 ? e : -e;
    }
  }
  return m;
}

TEST(Ecdf, TableIsSortedTrainingColumn) {
  Matrix train(4, 1);
  train << 3, 1, 4, 2;
  const auto model = EcdfDetector::fit(DetectorKind::kEcod, instances(train));
  EXPECT_EQ(model.tables().sorted[0], (std::vector<double>{1, 2, 3, 4}));
}

TEST(Ecdf, RightTailOfPointPastTheRange) {
  Matrix train(100, 1);
  for (int i = 0; i < 100; ++i) train(i, 0) = i + 1;
  const auto model = EcdfDetector::fit(DetectorKind::kEcod, instances(train));
  EXPECT_DOUBLE_EQ(model.tables().right_tail(0, 101.0), 1.0 / 101.0);
  const double x = 101.0;
  // Left tail is 1 so only the right contribution counts.
  EXPECT_NEAR(model.score_one({&x, 1}), -std::log(1.0 / 101.0), 1e-12);
}

TEST(Ecdf, ScoresMatchBruteForceOracle) {
  Rng rng = make_rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 8 + uniform_index(rng, 193);
    const std::size_t d = 1 + uniform_index(rng, 5);
    Matrix train = trial % 2 ? gaussian(rng, n, d) : skewed(rng, n, d);
    // Some ties exercise the <= / >= boundaries.
    for (std::size_t i = 0; i < n / 5; ++i) train(uniform_index(rng, n), 0) = train(0, 0);
    Matrix probe = 1.5 * gaussian(rng, 40, d);
    probe.row(0) = train.row(3);
    const auto ecod = EcdfDetector::fit(DetectorKind::kEcod, instances(train));
    const auto copod = EcdfDetector::fit(DetectorKind::kCopod, instances(train));
    const auto es = ecod.score(instances(probe));
    const auto cs = copod.score(instances(probe));
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
      const std::span<const double> x(probe.data() + i * probe.cols(), d);
      EXPECT_NEAR(es[i], oracle::ecod_score(train, x), 1e-9);
      EXPECT_NEAR(cs[i], oracle::copod_score(train, x), 1e-9);
    }
  }
}

TEST(Ecdf, TailsStayInRange) {
  Rng rng = make_rng(2);
  const Matrix train = gaussian(rng, 50, 2);
  const auto tables = EcdfTables::build(train);
  for (double x : {-10.0, -1.0, 0.0, 0.3, 10.0}) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (double p : {tables.left_tail(j, x), tables.right_tail(j, x)}) {
        EXPECT_GE(p, 1.0 / 51.0);
        EXPECT_LE(p, 1.0);
      }
    }
  }
}

TEST(Ecdf, DuplicatedTrainingSetLeavesScoresUnchanged) {
  Rng rng = make_rng(41);
  const Matrix train = skewed(rng, 60, 3);
  Matrix doubled(120, 3);
  doubled << train, train;
  // Probes inside the training range, where the 1/(n+1) floor is inactive.
  Matrix probe(30, 3);
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double lo = train.col(j).minCoeff(), hi = train.col(j).maxCoeff();
      probe(i, j) = lo + (hi - lo) * uniform01(rng);
    }
  }
  for (auto kind : {DetectorKind::kEcod, DetectorKind::kCopod}) {
    const auto a = EcdfDetector::fit(kind, instances(train)).score(instances(probe));
    const auto b = EcdfDetector::fit(kind, instances(doubled)).score(instances(probe));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Ecdf, OneDimensionalScoreIsValleyShaped) {
  Rng rng = make_rng(5);
  const Matrix train = gaussian(rng, 200, 1);
  const auto model = EcdfDetector::fit(DetectorKind::kEcod, instances(train));
  std::vector<double> scores;
  for (double x = -4.0; x <= 4.0; x += 0.01) scores.push_back(model.score_one({&x, 1}));
  const auto bottom = std::min_element(scores.begin(), scores.end()) - scores.begin();
  for (long i = 1; i <= bottom; ++i) EXPECT_LE(scores[i], scores[i - 1]);
  for (std::size_t i = bottom + 1; i < scores.size(); ++i) EXPECT_GE(scores[i], scores[i - 1]);
}

TEST(IForest, AveragePathLengthMatchesHarmonicSum) {
  EXPECT_EQ(IsolationForest::average_path_length(1), 0.0);
  EXPECT_EQ(IsolationForest::average_path_length(2), 1.0);
  for (std::size_t n : {3, 4, 10, 64, 256, 1000}) {
    // ln(k) + Euler-Mascheroni approximates H(k) to O(1/k).
    EXPECT_NEAR(IsolationForest::average_path_length(n), oracle::average_path(n),
                1.5 / static_cast<double>(n))
        << n;
  }
}

TEST(IForest, FarOutlierOutranksMedianTrainingPoint) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, 9);
    const std::size_t n = 16 + uniform_index(rng, 49);
    const Matrix train = gaussian(rng, n, 1);
    IForestParams params;
    params.subsample = n;
    const auto model = IsolationForest::fit(instances(train), params, seed);
    auto train_scores = model.score(instances(train));
    std::nth_element(train_scores.begin(), train_scores.begin() + n / 2, train_scores.end());
    Matrix far(1, 1);
    far << 25.0;
    EXPECT_GT(model.score(instances(far))[0], train_scores[n / 2]) << "seed " << seed;
  }
}

TEST(IForest, TreesRespectRangeHeightAndSubsampleCap) {
  Rng rng = make_rng(3);
  const Matrix train = gaussian(rng, 40, 3);
  IForestParams params;
  params.trees = 20;
  params.subsample = 256;
  const auto model = IsolationForest::fit(instances(train), params, 3);
  EXPECT_EQ(model.subsample(), 40u);
  EXPECT_EQ(model.height_limit(), static_cast<std::size_t>(std::ceil(std::log2(40.0))));
  for (const auto& tree : model.trees()) {
    EXPECT_EQ(tree[0].size, 40u);
    // Depth-first walk.
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      const auto [id, depth] = stack.back();
      stack.pop_back();
      const auto& node = tree[id];
      EXPECT_LE(depth, model.height_limit());
      if (node.feature < 0) continue;
      EXPECT_GE(node.split, train.col(node.feature).minCoeff());
      EXPECT_LE(node.split, train.col(node.feature).maxCoeff());
      EXPECT_EQ(tree[node.left].size + tree[node.right].size, node.size);
      stack.push_back({node.left, depth + 1});
      stack.push_back({node.right, depth + 1});
    }
  }
}

TEST(IForest, ScoreIsTwoToMinusMeanPathOverC) {
  Rng rng = make_rng(4);
  const Matrix train = gaussian(rng, 100, 2);
  IForestParams params;
  params.trees = 10;
  params.subsample = 64;
  const auto model = IsolationForest::fit(instances(train), params, 4);
  const Matrix probe = 2.0 * gaussian(rng, 10, 2);
  const auto scores = model.score(instances(probe));
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    double total = 0.0;
    for (const auto& tree : model.trees()) {
      int node = 0;
      double depth = 0.0;
      while (tree[node].feature >= 0) {
        node = probe(i, tree[node].feature) < tree[node].split ? tree[node].left : tree[node].right;
        depth += 1.0;
      }
      total += depth + oracle::average_path_closed_form(tree[node].size);
    }
    const double expected = std::pow(2.0, -(total / 10.0) / oracle::average_path_closed_form(64));
    EXPECT_NEAR(scores[i], expected, 1e-12);
  }
}

TEST(IForest, DuplicatedTrainingSetKeepsScoresOnAverage) {
  Rng rng = make_rng(8);
  const Matrix train = gaussian(rng, 300, 2);
  Matrix doubled(600, 2);
  doubled << train, train;
  const Matrix probe = 1.5 * gaussian(rng, 50, 2);
  std::vector<double> a(50, 0.0), b(50, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sa = IsolationForest::fit(instances(train), {}, seed).score(instances(probe));
    const auto sb = IsolationForest::fit(instances(doubled), {}, seed).score(instances(probe));
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] += sa[i] / 20.0;
      b[i] += sb[i] / 20.0;
    }
  }
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(a[i], b[i], 0.02);
}

TEST(Ocsvm, SparseClusterScoresHigher) {
  Rng rng = make_rng(6);
  Matrix train(330, 2);
  for (int i = 0; i < 300; ++i) {
    train(i, 0) = 0.8 + 0.03 * standard_normal(rng);
    train(i, 1) = 0.8 + 0.03 * standard_normal(rng);
  }
  for (int i = 300; i < 330; ++i) {
    train(i, 0) = 0.1 + 0.03 * standard_normal(rng);
    train(i, 1) = 0.1 + 0.03 * standard_normal(rng);
  }
  const auto model = LinearOcsvm::fit(instances(train), {}, 6);
  const auto scores = model.score(instances(train));
  const double dense = std::accumulate(scores.begin(), scores.begin() + 300, 0.0) / 300.0;
  const double sparse = std::accumulate(scores.begin() + 300, scores.end(), 0.0) / 30.0;
  EXPECT_GT(sparse, dense);
  // ρ - w.x by definition.
  EXPECT_NEAR(scores[0], model.offset() - model.weights().dot(train.row(0).transpose()), 1e-12);
}

TEST(Autoencoder, ReconstructsTrainingDataFarBetterThanShuffledProbe) {
  Rng rng = make_rng(10);
  // Rank-2 structure in 6 features.
  Matrix train(600, 6);
  for (int i = 0; i < 600; ++i) {
    const double a = uniform01(rng), b = uniform01(rng);
    for (int j = 0; j < 6; ++j) {
      train(i, j) = 0.5 * (j % 3 == 0 ? a : j % 3 == 1 ? b : 0.5 * (a + b)) + 0.2 + 0.01 * standard_normal(rng);
    }
  }
  Matrix shuffled = train;
  for (int j = 0; j < 6; ++j) {
    std::vector<int> order(600);
    std::iota(order.begin(), order.end(), 0);
    for (int i = 599; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    for (int i = 0; i < 600; ++i) shuffled(i, j) = train(order[i], j);
  }
  AutoencoderParams params;
  params.window = 1;
  params.hidden = 16;
  params.bottleneck = 3;
  params.epochs = 60;
  const auto model = ReconstructionAutoencoder::fit(instances(train), params, 10);
  const auto own = model.score(instances(train));
  const auto probe = model.score(instances(shuffled));
  const double own_mean = std::accumulate(own.begin(), own.end(), 0.0) / 600.0;
  const double probe_mean = std::accumulate(probe.begin(), probe.end(), 0.0) / 600.0;
  EXPECT_LT(own_mean, 0.1 * probe_mean) << own_mean << " vs " << probe_mean;
  EXPECT_EQ(model.network().input_size(), 6u);
  EXPECT_EQ(model.network().output_size(), 6u);
}

TEST(Fit, DeterministicPerSeedAndRejectsTinyTraining) {
  Rng rng = make_rng(12);
  const Matrix train = gaussian(rng, 64, 2);
  DetectorHyper hyper;
  hyper.autoencoder.window = 1;
  hyper.autoencoder.epochs = 2;
  hyper.autoencoder.bottleneck = 1;
  for (auto kind : all_detector_kinds()) {
    const auto a = fit(kind, instances(train), hyper, 5);
    const auto b = fit(kind, instances(train), hyper, 5);
    EXPECT_EQ(serialize(*a).dump(), serialize(*b).dump()) << to_string(kind);
    EXPECT_THROW(fit(kind, instances(train.topRows(7)), hyper, 5), DataError) << to_string(kind);
  }
  hyper.iforest.trees = 0;
  EXPECT_THROW(fit(DetectorKind::kIForest, instances(train), hyper, 1), ConfigError);
}

TEST(Serialization, RoundTripGivesIdenticalScores) {
  Rng rng = make_rng(13);
  const Matrix train = gaussian(rng, 80, 3);
  const Matrix probe = gaussian(rng, 20, 3);
  DetectorHyper hyper;
  hyper.autoencoder.window = 1;
  hyper.autoencoder.epochs = 2;
  hyper.autoencoder.bottleneck = 1;
  for (auto kind : all_detector_kinds()) {
    const auto model = fit(kind, instances(train), hyper, 1);
    const auto back = deserialize(serialize(*model).dump());
    EXPECT_EQ(back->kind(), kind);
    EXPECT_EQ(back->score(instances(probe)), model->score(instances(probe))) << to_string(kind);
  }
}

TEST(Serialization, RejectsTruncatedAndWrongVersion) {
  Rng rng = make_rng(14);
  const auto model = EcdfDetector::fit(DetectorKind::kEcod, instances(gaussian(rng, 20, 2)));
  const std::string text = serialize(model).dump();
  EXPECT_THROW(deserialize(text.substr(0, text.size() / 2)), DataError);
  auto doc = serialize(model);
  doc["format_version"] = 0;
  try {
    deserialize(doc);
    FAIL() << "expected a version error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos);
  }
}

TEST(Score, RejectsDimensionMismatch) {
  Rng rng = make_rng(15);
  const auto model = EcdfDetector::fit(DetectorKind::kCopod, instances(gaussian(rng, 20, 2)));
  EXPECT_THROW(model.score(instances(gaussian(rng, 5, 3))), DataError);
}

TEST(Threshold, DefaultContaminationOnOneToHundred) {
  std::vector<double> scores(100);
  std::iota(scores.begin(), scores.end(), 1.0);
  const auto out = threshold_scores(scores, 0.12);
  EXPECT_EQ(std::accumulate(out.labels.begin(), out.labels.end(), 0), 12);
}

TEST(Threshold, TiesAndSmallCases) {
  const auto flat = threshold_scores(std::vector<double>(10, 2.0), 0.12);
  EXPECT_EQ(std::accumulate(flat.labels.begin(), flat.labels.end(), 0), 0);
  for (double s : flat.scaled_scores) EXPECT_EQ(s, 0.5);
  const auto half = threshold_scores(std::vector<double>{1, 2, 3, 4}, 0.5);
  EXPECT_EQ(half.labels, (Labels{0, 0, 1, 1}));
  EXPECT_DOUBLE_EQ(half.threshold_raw, 2.5);
  EXPECT_THROW(threshold_scores(std::vector<double>{}, 0.1), DataError);
  EXPECT_THROW(threshold_scores(std::vector<double>{1, 2}, 1.0), ConfigError);
}

TEST(Threshold, RandomDistinctScoresFlagTheContaminationShare) {
  Rng rng = make_rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 2000);
    const double c = trial % 3 ? 0.12 : 0.01 + 0.5 * uniform01(rng);
    std::vector<double> scores(n);
    for (auto& s : scores) s = standard_normal(rng);
    const auto out = threshold_scores(scores, c);
    const long flagged = std::accumulate(out.labels.begin(), out.labels.end(), 0L);
    EXPECT_EQ(static_cast<std::size_t>(flagged), oracle::flagged_count(scores, c));
    EXPECT_LE(std::abs(flagged - static_cast<long>(std::floor(c * n))), 1) << n << " " << c;
    // Output invariants.
    const double lo = *std::min_element(scores.begin(), scores.end());
    const double hi = *std::max_element(scores.begin(), scores.end());
    EXPECT_EQ(out.score_min, lo);
    EXPECT_EQ(out.score_max, hi);
    EXPECT_LE(lo, out.threshold_raw);
    EXPECT_LE(out.threshold_raw, hi);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(out.labels[i], scores[i] > out.threshold_raw ? 1 : 0);
      EXPECT_NEAR(out.scaled_scores[i], (scores[i] - lo) / (hi - lo), 1e-15);
      if (scores[i] == hi) EXPECT_EQ(out.scaled_scores[i], 1.0);
      if (scores[i] == lo) EXPECT_EQ(out.scaled_scores[i], 0.0);
    }
    EXPECT_NEAR(out.threshold_scaled, (out.threshold_raw - lo) / (hi - lo), 1e-15);
  }
}

TEST(Pool, RejectsDuplicatesAndSingletons) {
  EXPECT_THROW(validate_pool({DetectorKind::kEcod}), ConfigError);
  EXPECT_THROW(validate_pool({DetectorKind::kEcod, DetectorKind::kEcod}), ConfigError);
  EXPECT_NO_THROW(validate_pool({DetectorKind::kEcod, DetectorKind::kCopod}));
}

TEST(Pool, WindowedMembersAlignOnCommonRange) {
  Rng rng = make_rng(17);
  const Matrix train_values = gaussian(rng, 60, 2);
  Matrix test_values = gaussian(rng, 30, 2);
  const data::TimeSeries train(train_values, {"a", "b"});
  const data::TimeSeries test(test_values, {"a", "b"}, testing::random_labels(rng, 30));
  DetectorHyper hyper;
  hyper.autoencoder.window = 4;
  hyper.autoencoder.epochs = 1;
  hyper.autoencoder.bottleneck = 2;
  const auto ecod = fit(DetectorKind::kEcod, data::make_windows(train, 1), hyper, 1);
  const auto ae = fit(DetectorKind::kAutoencoder, data::make_windows(train, 4), hyper, 1);
  const auto pool = score_pool({ecod.get(), ae.get()}, test, 0.12);
  ASSERT_EQ(pool.length(), 27u);
  EXPECT_EQ(pool.timesteps.front(), 3);
  EXPECT_EQ(pool.truth.front(), (*test.labels())[3]);
  // The ecod column is the tail of its full-length scores.
  const auto full = ecod->score(data::make_windows(test, 1));
  EXPECT_EQ(pool.outputs[0].raw_scores.front(), full[3]);
}

}  // namespace
}  // namespace rlmsad::detect
