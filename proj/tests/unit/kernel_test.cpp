#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>

#include "../support/gradient_oracle.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/kernel/train.hpp"

using namespace smartpilot;
using namespace smartpilot::kernel;

namespace {

double plain_mse(const Tensor& out, const Tensor& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - target[i]) * (out[i] - target[i]);
  return s / static_cast<double>(out.size());
}

void expect_bit_identical(const Network& a, const Network& b) {
  ASSERT_EQ(a.layers.size(), b.layers.size());
  EXPECT_EQ(parameter_hash(a), parameter_hash(b));
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    for (std::size_t k = 0; k < a.layers[i].weight.size(); ++k)
      ASSERT_EQ(std::bit_cast<std::uint64_t>(a.layers[i].weight[k]), std::bit_cast<std::uint64_t>(b.layers[i].weight[k]));
  }
}

}  // namespace

TEST(Forward, IdentityDenseWithRelu) {
  Network net = make_network({dense(2, 2, Activation::relu)}, 1);
  net.layers[0].weight.values = {1, 0, 0, 1};
  net.layers[0].bias.values = {0, 0};
  const Tensor out = forward(net, Tensor::vector({1.0, -2.0}));
  EXPECT_EQ(out.values, (std::vector<double>{1.0, 0.0}));
}

TEST(Forward, ZeroLstmGivesZeroOutput) {
  Network net = make_network({lstm(3, 4, true)}, 9);
  std::fill(net.layers[0].weight.values.begin(), net.layers[0].weight.values.end(), 0.0);
  std::fill(net.layers[0].bias.values.begin(), net.layers[0].bias.values.end(), 0.0);
  const Tensor out = forward(net, Tensor({5, 3}, {1, 2, 3, -4, 5, 6, 7, 8, 9, 1, 1, 1, -2, 0.5, 3}));
  ASSERT_EQ(out.shape, (std::vector<std::size_t>{5, 4}));
  for (double v : out.values) EXPECT_EQ(v, 0.0);
}

TEST(Forward, TwoLayerDenseMatchesHandMultiply) {
  // W1 = [[1, 2], [-1, 0.5], [0, 3]], b1 = [0.1, -0.2, 0.3], tanh
  // W2 = [[2, -1, 0.5]], b2 = [0.25], identity
  Network net = make_network({dense(2, 3, Activation::tanh), dense(3, 1)}, 3);
  net.layers[0].weight.values = {1, 2, -1, 0.5, 0, 3};
  net.layers[0].bias.values = {0.1, -0.2, 0.3};
  net.layers[1].weight.values = {2, -1, 0.5};
  net.layers[1].bias.values = {0.25};
  // Hidden pre-activations on x = [1, 1]: 3.1, -0.7, 3.3.
  const double expected = 2 * std::tanh(3.1) - std::tanh(-0.7) + 0.5 * std::tanh(3.3) + 0.25;
  const Tensor out = forward(net, Tensor::vector({1.0, 1.0}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0], expected, 1e-12);
}

TEST(Forward, ShapeMismatchNamesLayer) {
  Network net = make_network({dense(4, 3), dense(3, 2)}, 1);
  try {
    forward(net, Tensor::vector({1.0, 2.0}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(Network, SoftmaxOnlyAsFinalLayer) {
  EXPECT_THROW(make_network({dense(2, 2, Activation::softmax), dense(2, 2)}, 1), DimensionError);
  EXPECT_NO_THROW(make_network({dense(2, 2), dense(2, 2, Activation::softmax)}, 1));
}

TEST(Network, SameSeedSameInitialization) {
  const std::vector<LayerSpec> specs{lstm(3, 8, true), lstm(8, 4), dense(4, 2)};
  expect_bit_identical(make_network(specs, 77), make_network(specs, 77));
  EXPECT_NE(parameter_hash(make_network(specs, 77)), parameter_hash(make_network(specs, 78)));
}

TEST(Network, InitializationWithinGlorotBoundsAndForgetBias) {
  Network net = make_network({dense(10, 6), lstm(6, 5)}, 5);
  const double limit = std::sqrt(6.0 / 16.0);
  for (double w : net.layers[0].weight.values) EXPECT_LE(std::abs(w), limit);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(net.layers[1].bias[k], (k >= 5 && k < 10) ? 1.0 : 0.0);
}

TEST(Gradients, ZeroAtMinimumOfMse) {
  Network net = make_network({dense(3, 4, Activation::tanh), dense(4, 2)}, 11);
  const Tensor x = Tensor::vector({0.3, -0.1, 0.7});
  const Tensor y = forward(net, x);
  auto [loss, grads] = gradients(net, x, y, LossSpec::mse());
  EXPECT_EQ(loss, 0.0);
  for (const auto& e : grads.entries) {
    for (double v : e.weight.values) EXPECT_EQ(v, 0.0);
    for (double v : e.bias.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(Gradients, MatchCentralDifferencesOnRandomNetworks) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = oracle::random_network(seed, 16);
    auto [loss, grads] = gradients(r.net, r.input, r.target, LossSpec::mse());
    const auto numeric = oracle::central_differences(
        r.net, [&](const Network& n) { return plain_mse(forward(n, r.input), r.target); });
    ASSERT_EQ(numeric.size(), grads.entries.size());
    for (std::size_t e = 0; e < numeric.size(); ++e) {
      const auto& g = grads.entries[e];
      std::vector<double> analytic(g.weight.values);
      analytic.insert(analytic.end(), g.bias.values.begin(), g.bias.values.end());
      ASSERT_EQ(analytic.size(), numeric[e].size());
      for (std::size_t k = 0; k < analytic.size(); ++k)
        ASSERT_LT(oracle::relative_error(analytic[k], numeric[e][k]), 1e-4)
            << "seed " << seed << " layer " << g.layer << " param " << k;
    }
  }
}

TEST(Gradients, SoftmaxCrossEntropyAndReluMatchFiniteDifferences) {
  Network net = make_network({dense(4, 6, Activation::relu), dense(6, 3, Activation::softmax)}, 21);
  const Tensor x = Tensor::vector({0.4, -0.8, 1.2, 0.3});
  const Tensor t = Tensor::vector({0.0, 1.0, 0.0});
  // Keep relu pre-activations away from the kink.
  Tape tape;
  forward(net, x, tape);
  for (double z : tape.entries[0].pre.values) ASSERT_GT(std::abs(z), 1e-3);
  auto [loss, grads] = gradients(net, x, t, LossSpec::cross_entropy());
  const auto numeric = oracle::central_differences(net, [&](const Network& n) {
    return -std::log(forward(n, x)[1]);
  });
  for (std::size_t e = 0; e < numeric.size(); ++e) {
    std::vector<double> analytic(grads.entries[e].weight.values);
    analytic.insert(analytic.end(), grads.entries[e].bias.values.begin(), grads.entries[e].bias.values.end());
    for (std::size_t k = 0; k < analytic.size(); ++k)
      EXPECT_LT(oracle::relative_error(analytic[k], numeric[e][k]), 1e-4);
  }
}

TEST(Gradients, FrozenLayersHaveNoEntries) {
  Network net = make_network({dense(3, 5, Activation::tanh), dense(5, 4, Activation::tanh), dense(4, 2)}, 4);
  net.layers[0].spec.trainable = false;
  net.layers[1].spec.trainable = false;
  auto [loss, grads] = gradients(net, Tensor::vector({1, 2, 3}), Tensor::vector({0, 1}), LossSpec::mse());
  ASSERT_EQ(grads.entries.size(), 1u);
  EXPECT_EQ(grads.entries[0].layer, 2u);
  EXPECT_EQ(grads.find(0), nullptr);
}

TEST(Gradients, NonFiniteLossIsNumericError) {
  Network net = make_network({dense(2, 2, Activation::softmax)}, 1);
  net.layers[0].weight.values = {800, 0, -800, 0};
  EXPECT_THROW(gradients(net, Tensor::vector({1, 0}), Tensor::vector({0, 1}), LossSpec::cross_entropy()),
               NumericError);
}

TEST(Loss, CompositeSumsWeightedTerms) {
  LossTerm a{LossKind::mse, 2.0, 0, 2};
  LossTerm b{LossKind::range_hinge, 0.5, 2, 1};
  b.lo = {0.0};
  b.hi = {1.0};
  const LossSpec spec{{a, b}};
  const auto v = evaluate_loss(spec, Tensor::vector({1, 2, 3}), Tensor::vector({0, 0, 0}));
  // mse over (1, 2) = 2.5, hinge(3 vs [0,1]) = 4
  EXPECT_DOUBLE_EQ(v.value, 2.0 * 2.5 + 0.5 * 4.0);
  EXPECT_DOUBLE_EQ(v.grad[2], 0.5 * 4.0);
}

TEST(Train, EmptyDatasetIsInputError) {
  Network net = make_network({dense(1, 1)}, 1);
  EXPECT_THROW(train(net, {}, TrainConfig{}, LossSpec::mse()), InputError);
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  Network net = make_network({dense(2, 4, Activation::tanh), dense(4, 1)}, 8);
  std::vector<Sample> data{{Tensor::vector({1, 2}), Tensor::vector({3})}, {Tensor::vector({-1, 0}), Tensor::vector({1})}};
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 5;
  const auto r = train(net, data, cfg, LossSpec::mse());
  expect_bit_identical(r.model, net);
}

TEST(Train, LinearRegressionRecoversLeastSquaresSlope) {
  // Closed-form least squares on y = 2x (with intercept): slope = cov(x,y)/var(x) = 2.
  std::vector<Sample> data;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = -10; i <= 10; ++i) {
    const double x = i / 10.0;
    data.push_back({Tensor::vector({x}), Tensor::vector({2.0 * x})});
    sx += x;
    sy += 2.0 * x;
    sxx += x * x;
    sxy += x * 2.0 * x;
  }
  const double n = static_cast<double>(data.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  ASSERT_NEAR(slope, 2.0, 1e-12);

  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 0.5;
  cfg.epochs = 200;
  cfg.batch_size = data.size();
  const auto r = train(make_network({dense(1, 1)}, 2), data, cfg, LossSpec::mse());
  EXPECT_NEAR(r.model.layers[0].weight[0], slope, 0.05);
}

TEST(Train, SameSeedIsBitIdentical) {
  std::vector<Sample> data;
  CounterRng rng(5, "data");
  for (int i = 0; i < 40; ++i) {
    Tensor x({3, 2});
    for (auto& v : x.values) v = rng.uniform(-1, 1);
    data.push_back({x, Tensor::vector({rng.uniform(-1, 1)})});
  }
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 7;
  cfg.seed = 13;
  const std::vector<LayerSpec> specs{lstm(2, 6), dense(6, 1)};
  const auto a = train(make_network(specs, 1), data, cfg, LossSpec::mse());
  const auto b = train(make_network(specs, 1), data, cfg, LossSpec::mse());
  EXPECT_EQ(std::bit_cast<std::uint64_t>(a.loss_history.back()), std::bit_cast<std::uint64_t>(b.loss_history.back()));
  expect_bit_identical(a.model, b.model);
}

TEST(Train, FrozenLayersAreBitIdenticalAfterTraining) {
  Network net = make_network({dense(2, 8, Activation::tanh), dense(8, 1)}, 3);
  net.layers[0].spec.trainable = false;
  const auto frozen_before = net.layers[0];
  std::vector<Sample> data{{Tensor::vector({1, 2}), Tensor::vector({3})}, {Tensor::vector({-1, 0}), Tensor::vector({1})}};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  const auto r = train(net, data, cfg, LossSpec::mse());
  EXPECT_EQ(r.model.layers[0], frozen_before);
  EXPECT_NE(r.model.layers[1], net.layers[1]);
}

TEST(Train, CrossEntropyDecreasesOnSeparableData) {
  std::vector<Sample> data;
  CounterRng rng(17, "toy");
  for (int i = 0; i < 60; ++i) {
    const bool positive = i % 2 == 0;
    const double x0 = rng.uniform(0.2, 1.0) * (positive ? 1 : -1);
    data.push_back({Tensor::vector({x0, rng.uniform(-1, 1)}),
                    positive ? Tensor::vector({1, 0}) : Tensor::vector({0, 1})});
  }
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 10;
  const Network init = make_network({dense(2, 4, Activation::tanh), dense(4, 2, Activation::softmax)}, 6);
  const double initial = mean_loss(init, data, LossSpec::cross_entropy());
  const auto r = train(init, data, cfg, LossSpec::cross_entropy());
  EXPECT_LT(r.loss_history.back(), initial);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Network net = make_network({lstm(3, 5, true), lstm(5, 4), dense(4, 2, Activation::softmax)}, 99);
  net.layers[1].spec.trainable = false;
  net.layers[2].bias[0] = -0.0;
  net.layers[2].bias[1] = 1.0 / 3.0;
  const auto path = (std::filesystem::temp_directory_path() / "sp_ckpt_test.json").string();
  save_network(net, path);
  const Network back = load_network(path);
  EXPECT_EQ(back, net);
  expect_bit_identical(back, net);
  EXPECT_TRUE(std::signbit(back.layers[2].bias[0]));
  std::filesystem::remove(path);
}
