#include <gtest/gtest.h>

#include <cmath>

#include "ganfair/adam.hpp"

namespace ganfair {
namespace {

TEST(Adam, FirstStepIsScaledSignStep) {
  Tensor p({3}, {1.0, -2.0, 3.0});
  const Tensor g({3}, {1.0, 1.0, 1.0});
  AdamState state(1e-3, 0.9, 0.999, 1e-8);
  const std::vector<double> before = p.values();
  adam_step({&p}, {g}, state);
  EXPECT_EQ(state.t, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    // bias corrections cancel at t=1: delta = -lr * g / (|g| + eps)
    EXPECT_NEAR(p.values()[i] - before[i], -1e-3, 1e-10);
  }
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  Tensor p({2, 2}, {0.5, -0.5, 1.5, 2.5});
  const Tensor g = Tensor::zeros({2, 2});
  AdamState state(0.1, 0.9, 0.999, 1e-8);
  const std::vector<double> before = p.values();
  adam_step({&p}, {g}, state);
  EXPECT_EQ(p.values(), before);
}

// Independent recurrence oracle: m/v updates and bias corrections spelled
// out step by step.
TEST(Adam, TwoStepsMatchRecurrenceOracle) {
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> g = {0.1, -0.2, 0.3};

  std::vector<double> expected = {1.0, -2.0, 3.0};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 2; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(b1, t));
      const double vhat = v[i] / (1 - std::pow(b2, t));
      expected[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }

  Tensor p({3}, {1.0, -2.0, 3.0});
  const Tensor grad({3}, g);
  AdamState state(lr, b1, b2, eps);
  adam_step({&p}, {grad}, state);
  adam_step({&p}, {grad}, state);
  EXPECT_EQ(state.t, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p.values()[i], expected[i], 1e-12);
  }
}

TEST(Adam, ShapeMismatchRejected) {
  Tensor p({3}, {1.0, 2.0, 3.0});
  const Tensor g({2}, {1.0, 2.0});
  AdamState state(1e-3);
  EXPECT_THROW(adam_step({&p}, {g}, state), std::invalid_argument);
}

TEST(Adam, HyperparameterValidation) {
  EXPECT_THROW(AdamState(0.0), std::invalid_argument);
  EXPECT_THROW(AdamState(1e-3, 1.0), std::invalid_argument);
  EXPECT_THROW(AdamState(1e-3, 0.9, 1.0), std::invalid_argument);
  EXPECT_THROW(AdamState(1e-3, 0.9, 0.999, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace ganfair
