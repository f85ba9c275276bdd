#include <cmath>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/neuralcore.hpp"

namespace rlmsad::nn {
namespace {

using rlmsad::testing::check_gradients;
using rlmsad::testing::random_matrix;

TEST(Forward, ZeroAndIdentityNetworks) {
  DenseNetwork zero({3, 4, 2});
  Matrix batch(2, 3);
  batch << 1, 2, 3, -4, 5, -6;
  EXPECT_TRUE(zero.forward(batch).isZero());

  DenseNetwork identity({3, 3});
  identity.layers()[0].weights = Matrix::Identity(3, 3);
  EXPECT_EQ(identity.forward(batch), batch);
}

TEST(Forward, HandComputedOneTwoOne) {
  DenseNetwork net({1, 2, 1});
  net.layers()[0].weights << 0.5, -1.0;
  net.layers()[0].bias << 0.1, 0.2;
  net.layers()[1].weights << 2.0, 3.0;
  net.layers()[1].bias << -0.5;
  // x = 1: hidden = relu(0.6), relu(-0.8) = 0.6, 0; out = 1.2 - 0.5.
  EXPECT_NEAR(net.forward_one(Vector::Constant(1, 1.0))[0], 0.7, 1e-15);
  // x = -1: hidden = relu(-0.4), relu(1.2) = 0, 1.2; out = 3.6 - 0.5.
  EXPECT_NEAR(net.forward_one(Vector::Constant(1, -1.0))[0], 3.1, 1e-15);
}

TEST(Forward, IsPureAndChecksShape) {
  const auto net = DenseNetwork::initialize({4, 8, 3}, 1);
  Rng rng = make_rng(2);
  const Matrix batch = random_matrix(rng, 5, 4);
  const Matrix a = net.forward(batch);
  EXPECT_EQ(a, net.forward(batch));
  EXPECT_EQ(a.rows(), 5);
  EXPECT_EQ(a.cols(), 3);
  EXPECT_THROW(net.forward(random_matrix(rng, 5, 3)), Error);
}

TEST(Loss, HuberQuadraticAndLinearBranches) {
  const auto h = Loss::huber(1.0);
  EXPECT_DOUBLE_EQ(h.value(0.5), 0.125);
  EXPECT_DOUBLE_EQ(h.value(-3.0), 2.5);
  EXPECT_DOUBLE_EQ(h.derivative(-3.0), -1.0);
  EXPECT_DOUBLE_EQ(Loss::mse().value(2.0), 4.0);
}

TEST(Backward, ZeroAtExactTargets) {
  const auto net = DenseNetwork::initialize({3, 5, 2}, 4);
  Rng rng = make_rng(4);
  const Matrix batch = random_matrix(rng, 6, 3);
  const auto result = backward(net, batch, Loss::mse(), net.forward(batch));
  EXPECT_EQ(result.loss, 0.0);
  for (const auto& layer : result.tape.layers) {
    EXPECT_TRUE(layer.weights.isZero());
    EXPECT_TRUE(layer.bias.isZero());
  }
}

TEST(Backward, MatchesFiniteDifferencesOnFourEightThree) {
  Rng rng = make_rng(8);
  const auto net = DenseNetwork::initialize({4, 8, 3}, 8);
  const Matrix batch = random_matrix(rng, 7, 4);
  const Matrix targets = random_matrix(rng, 7, 3);
  for (const auto& loss : {Loss::mse(), Loss::huber(1.0)}) {
    const auto check = check_gradients(net, batch, loss, targets);
    EXPECT_LT(check.worst_relative, 1e-4);
    EXPECT_EQ(check.checked, net.parameter_count());
  }
}

TEST(Backward, MatchesFiniteDifferencesOnRandomArchitectures) {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const auto sizes = rlmsad::testing::random_sizes(rng);
    auto net = DenseNetwork::initialize(sizes, rng());
    // Non-zero biases keep pre-activations off the relu kink at exactly 0.
    for (auto& layer : net.layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = 0.5 * standard_normal(rng);
    }
    const std::size_t rows = 1 + uniform_index(rng, 8);
    const Matrix batch = random_matrix(rng, rows, sizes.front());
    const Matrix targets = random_matrix(rng, rows, sizes.back(), 2.0);
    const Loss loss = trial % 2 ? Loss::mse() : Loss::huber(0.5 + uniform01(rng));
    EXPECT_LT(check_gradients(net, batch, loss, targets).worst_relative, 1e-4) << "trial " << trial;
  }
}

TEST(Backward, MaskIgnoresEntries) {
  const auto net = DenseNetwork::initialize({2, 4, 3}, 9);
  Rng rng = make_rng(9);
  const Matrix batch = random_matrix(rng, 4, 2);
  Matrix targets = random_matrix(rng, 4, 3);
  Matrix mask = Matrix::Zero(4, 3);
  for (int i = 0; i < 4; ++i) mask(i, i % 3) = 1.0;
  const auto masked = backward(net, batch, Loss::mse(), targets, &mask);
  // Changing masked-out targets leaves loss and gradients untouched.
  for (int i = 0; i < 4; ++i) targets(i, (i + 1) % 3) += 100.0;
  const auto again = backward(net, batch, Loss::mse(), targets, &mask);
  EXPECT_EQ(masked.loss, again.loss);
  for (std::size_t l = 0; l < masked.tape.layers.size(); ++l) {
    EXPECT_EQ(masked.tape.layers[l].weights, again.tape.layers[l].weights);
  }
  // And the loss is the mean over the four active entries only.
  const Matrix out = net.forward(batch);
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) expected += std::pow(out(i, i % 3) - targets(i, i % 3), 2);
  EXPECT_NEAR(masked.loss, expected / 4.0, 1e-12);
}

TEST(Backward, RejectsShapeMismatch) {
  const auto net = DenseNetwork::initialize({2, 3, 2}, 1);
  EXPECT_THROW(backward(net, Matrix::Zero(3, 2), Loss::mse(), Matrix::Zero(3, 1)), Error);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  auto net = DenseNetwork::initialize({3, 4, 2}, 3);
  const auto before = net;
  AdamState state(net);
  adam_step(net, GradientTape::zeros_like(net), 0.1, state);
  EXPECT_TRUE(net == before);
}

TEST(Adam, SolvesScalarQuadratic) {
  // One bias parameter x with loss (x - 3)^2: a 1-1 net with zero weight.
  DenseNetwork net({1, 1});
  AdamState state(net);
  for (int step = 0; step < 500; ++step) {
    auto tape = GradientTape::zeros_like(net);
    tape.layers[0].bias[0] = 2.0 * (net.layers()[0].bias[0] - 3.0);
    adam_step(net, tape, 0.05, state);
  }
  EXPECT_LT(std::abs(net.layers()[0].bias[0] - 3.0), 1e-2);
}

TEST(Adam, IdenticalInputsGiveIdenticalUpdates) {
  auto a = DenseNetwork::initialize({3, 4, 2}, 5);
  auto b = a;
  AdamState sa(a), sb(b);
  Rng rng = make_rng(5);
  const Matrix batch = random_matrix(rng, 4, 3);
  const Matrix targets = random_matrix(rng, 4, 2);
  for (int i = 0; i < 3; ++i) {
    adam_step(a, backward(a, batch, Loss::mse(), targets).tape, 1e-2, sa);
    adam_step(b, backward(b, batch, Loss::mse(), targets).tape, 1e-2, sb);
  }
  EXPECT_TRUE(a == b);
}

TEST(Adam, RejectsNonFiniteGradient) {
  auto net = DenseNetwork::initialize({2, 2}, 1);
  AdamState state(net);
  auto tape = GradientTape::zeros_like(net);
  tape.layers[0].weights(0, 0) = std::nan("");
  EXPECT_THROW(adam_step(net, tape, 0.1, state), Error);
}

TEST(Initialize, DeterministicBoundedAndSeedSensitive) {
  const auto a = DenseNetwork::initialize({100, 20, 3}, 17);
  EXPECT_TRUE(a == DenseNetwork::initialize({100, 20, 3}, 17));
  EXPECT_FALSE(a == DenseNetwork::initialize({100, 20, 3}, 18));
  EXPECT_LE(a.layers()[0].weights.cwiseAbs().maxCoeff(), 0.1 * std::sqrt(3.0));
  EXPECT_TRUE(a.layers()[0].bias.isZero());
  EXPECT_THROW(DenseNetwork::initialize({}, 1), Error);
}

TEST(Training, AutoencoderOnALineReducesError) {
  Rng rng = make_rng(12);
  Matrix points(64, 2);
  for (int i = 0; i < 64; ++i) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    points(i, 0) = u;
    points(i, 1) = 0.5 * u + 0.2;
  }
  auto net = DenseNetwork::initialize({2, 4, 2}, 12);
  AdamState state(net);
  const double before = backward(net, points, Loss::mse(), points).loss;
  for (int step = 0; step < 2000; ++step) {
    adam_step(net, backward(net, points, Loss::mse(), points).tape, 1e-2, state);
  }
  const double after = backward(net, points, Loss::mse(), points).loss;
  EXPECT_LE(after, 0.1 * before) << before << " -> " << after;
}

TEST(Serialization, RoundTripAndVersionCheck) {
  const auto net = DenseNetwork::initialize({3, 5, 2}, 6);
  const auto doc = net.to_json();
  EXPECT_TRUE(DenseNetwork::from_json(doc) == net);
  EXPECT_TRUE(DenseNetwork::from_json(nlohmann::json::parse(doc.dump())) == net);
  auto bad = doc;
  bad["format_version"] = kNetworkFormatVersion + 1;
  EXPECT_THROW(DenseNetwork::from_json(bad), Error);
}

}  // namespace
}  // namespace rlmsad::nn
