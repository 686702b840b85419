#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ganfair/mlp.hpp"
#include "ganfair/random.hpp"

namespace ganfair {
namespace {

TEST(MlpInit, ParameterCountMatchesArithmetic) {
  Rng rng(1);
  const MlpNetwork net =
      mlp_init({2, 32, 1}, Activation::Tanh, Activation::Sigmoid, rng);
  EXPECT_EQ(net.parameter_count(), 2u * 32 + 32 + 32 * 1 + 1);
  EXPECT_EQ(net.parameter_count(), 129u);
}

TEST(MlpInit, BiasesStartAtZero) {
  Rng rng(2);
  const MlpNetwork net =
      mlp_init({3, 8, 4}, Activation::Tanh, Activation::Identity, rng);
  for (const Tensor& bias : net.biases) {
    for (double v : bias.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(MlpInit, SameSeedSameParameters) {
  Rng a(7), b(7);
  const MlpNetwork na =
      mlp_init({2, 16, 2}, Activation::Tanh, Activation::Identity, a);
  const MlpNetwork nb =
      mlp_init({2, 16, 2}, Activation::Tanh, Activation::Identity, b);
  for (std::size_t i = 0; i < na.weights.size(); ++i) {
    EXPECT_EQ(na.weights[i].values(), nb.weights[i].values());
  }
}

TEST(MlpInit, WeightsRespectGlorotBound) {
  Rng rng(3);
  const MlpNetwork net =
      mlp_init({4, 6, 1}, Activation::Tanh, Activation::Identity, rng);
  const double bound0 = std::sqrt(6.0 / (4 + 6));
  for (double v : net.weights[0].values()) {
    EXPECT_LE(std::abs(v), bound0);
  }
}

TEST(MlpInit, FewerThanTwoSizesRejected) {
  Rng rng(1);
  EXPECT_THROW(mlp_init({3}, Activation::Tanh, Activation::Identity, rng),
               std::invalid_argument);
  EXPECT_THROW(mlp_init({}, Activation::Tanh, Activation::Identity, rng),
               std::invalid_argument);
}

TEST(MlpForward, ZeroNetWithSigmoidGivesHalf) {
  Rng rng(1);
  MlpNetwork net =
      mlp_init({2, 4, 1}, Activation::Tanh, Activation::Sigmoid, rng);
  for (Tensor& w : net.weights) {
    for (double& v : w.values()) v = 0.0;
  }
  const Tensor out = mlp_forward(net, Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(MlpForward, BatchShapeContract) {
  Rng rng(5);
  const MlpNetwork net =
      mlp_init({3, 8, 2}, Activation::Tanh, Activation::Identity, rng);
  const Tensor input = rng_standard_normal({17, 3}, rng);
  const Tensor out = mlp_forward(net, input);
  EXPECT_EQ(out.rows(), 17u);
  EXPECT_EQ(out.cols(), 2u);
}

TEST(MlpForward, WidthMismatchRejected) {
  Rng rng(5);
  const MlpNetwork net =
      mlp_init({3, 8, 2}, Activation::Tanh, Activation::Identity, rng);
  EXPECT_THROW(mlp_forward(net, Tensor::zeros({4, 2})), std::invalid_argument);
}

TEST(MlpForward, OneHiddenUnitHandOracle) {
  Rng rng(1);
  MlpNetwork net =
      mlp_init({1, 1, 1}, Activation::Tanh, Activation::Identity, rng);
  net.weights[0].values() = {2.0};
  net.biases[0].values() = {0.5};
  net.weights[1].values() = {-1.5};
  net.biases[1].values() = {0.25};
  const double x = 0.3;
  const double expected = -1.5 * std::tanh(2.0 * x + 0.5) + 0.25;
  const Tensor out = mlp_forward(net, Tensor::matrix(1, 1, {x}));
  EXPECT_NEAR(out.value(), expected, 1e-12);
}

TEST(MlpForward, ParametersUntouchedByForward) {
  Rng rng(9);
  const MlpNetwork net =
      mlp_init({2, 8, 2}, Activation::Tanh, Activation::Identity, rng);
  const std::vector<double> w0 = net.weights[0].values();
  (void)mlp_forward(net, rng_standard_normal({5, 2}, rng));
  EXPECT_EQ(net.weights[0].values(), w0);
}

TEST(MlpForward, SigmoidOutputsStayStrictlyInsideUnitInterval) {
  Rng rng(11);
  const MlpNetwork net =
      mlp_init({2, 16, 1}, Activation::LeakyRelu, Activation::Sigmoid, rng);
  const Tensor out = mlp_forward(net, rng_standard_normal({200, 2}, rng));
  for (double v : out.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(ConcatCondition, AppendsOneHotRow) {
  const Tensor input = Tensor::matrix(1, 2, {3.5, -1.0});
  const Tensor out = concat_condition(input, 1, 2);
  const std::vector<double> expected = {3.5, -1.0, 0.0, 1.0};
  EXPECT_EQ(out.values(), expected);
}

TEST(ConcatCondition, OneHotBlockSumsToOnePerRow) {
  Rng rng(4);
  const Tensor input = rng_standard_normal({6, 3}, rng);
  const Tensor out = concat_condition(input, 2, 4);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double block = 0.0;
    for (std::size_t j = 3; j < 7; ++j) block += out(i, j);
    EXPECT_DOUBLE_EQ(block, 1.0);
  }
}

TEST(ConcatCondition, OutOfRangeLabelRejected) {
  const Tensor input = Tensor::matrix(1, 2, {0.0, 0.0});
  EXPECT_THROW(concat_condition(input, 5, 2), std::invalid_argument);
  EXPECT_THROW(concat_condition(input, -1, 2), std::invalid_argument);
}

// Randomized nets: outputs under different labels differ when the one-hot
// columns carry nonzero first-layer weights.
TEST(ConcatCondition, LabelsChangeConditionedOutputs) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const MlpNetwork net =
        mlp_init({4, 8, 2}, Activation::Tanh, Activation::Identity, rng);
    const Tensor noise = rng_standard_normal({3, 2}, rng);
    const Tensor out0 = mlp_forward(net, concat_condition(noise, 0, 2));
    const Tensor out1 = mlp_forward(net, concat_condition(noise, 1, 2));
    EXPECT_NE(out0.values(), out1.values());
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(21);
  const MlpNetwork net =
      mlp_init({2, 5, 3}, Activation::LeakyRelu, Activation::Sigmoid, rng);
  std::stringstream buffer;
  save_mlp(net, buffer);
  const MlpNetwork loaded = load_mlp(buffer);
  EXPECT_EQ(loaded.layer_sizes, net.layer_sizes);
  EXPECT_EQ(loaded.hidden, net.hidden);
  EXPECT_EQ(loaded.output, net.output);
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    EXPECT_EQ(loaded.weights[i].values(), net.weights[i].values());
    EXPECT_EQ(loaded.biases[i].values(), net.biases[i].values());
  }
  std::stringstream again;
  save_mlp(loaded, again);
  EXPECT_EQ(buffer.str(), again.str());
}

TEST(Checkpoint, HeaderIsHumanReadable) {
  Rng rng(22);
  const MlpNetwork net =
      mlp_init({2, 32, 1}, Activation::Tanh, Activation::Sigmoid, rng);
  std::stringstream buffer;
  save_mlp(net, buffer);
  std::string line1, line2;
  std::getline(buffer, line1);
  std::getline(buffer, line2);
  EXPECT_EQ(line1, "mlp 2 32 1");
  EXPECT_EQ(line2, "tanh sigmoid");
}

TEST(Checkpoint, MalformedInputRejected) {
  std::stringstream bad("not_a_model 1 2\n");
  EXPECT_THROW(load_mlp(bad), std::runtime_error);
}

}  // namespace
}  // namespace ganfair
