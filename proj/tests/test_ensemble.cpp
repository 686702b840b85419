#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "ganfair/ensemble.hpp"
#include "ganfair/gradcheck.hpp"
#include "ganfair/random.hpp"

namespace ganfair {
namespace {

// Brute-force triple-loop reference for the distance regularizer.
double theta_oracle(const std::vector<Tensor>& q_sets, const Tensor& fakes,
                    double lambda, double eps_dist) {
  long double s = 0.0L;
  std::size_t pairs = 0;
  const std::size_t d = fakes.cols();
  for (const Tensor& q : q_sets) {
    for (std::size_t x = 0; x < q.rows(); ++x) {
      for (std::size_t f = 0; f < fakes.rows(); ++f) {
        long double sq = 0.0L;
        for (std::size_t j = 0; j < d; ++j) {
          const long double delta = q(x, j) - fakes(f, j);
          sq += delta * delta;
        }
        const long double dist = sqrtl(sq);
        s += dist > eps_dist ? dist : static_cast<long double>(eps_dist);
        ++pairs;
      }
    }
  }
  return static_cast<double>(lambda * static_cast<long double>(pairs) / s);
}

double theta_value(const EnsembleMemory& memory, const Tensor& fakes,
                   double lambda, double eps_dist) {
  Tape tape;
  return theta_regularizer(memory, tape.leaf(fakes), lambda, eps_dist).value();
}

TEST(Theta, SinglePairIsInverseDistance) {
  EnsembleMemory memory;
  memory.sets.push_back(Tensor::matrix(1, 1, {0.0}));
  EXPECT_DOUBLE_EQ(theta_value(memory, Tensor::matrix(1, 1, {1.0}), 1.0, 1e-6),
                   1.0);
}

TEST(Theta, TwoPointMemoryHandOracle) {
  EnsembleMemory memory;
  memory.sets.push_back(Tensor::matrix(2, 2, {0, 0, 1, 0}));
  const double theta =
      theta_value(memory, Tensor::matrix(1, 2, {0, 1}), 1.0, 1e-6);
  EXPECT_NEAR(theta, 2.0 / (1.0 + std::numbers::sqrt2), 1e-12);
  EXPECT_NEAR(theta, 0.828427, 1e-6);
}

TEST(Theta, EmptyMemoryIsZero) {
  EnsembleMemory memory;
  EXPECT_DOUBLE_EQ(theta_value(memory, Tensor::matrix(1, 2, {3, 4}), 1.0, 1e-6),
                   0.0);
}

TEST(Theta, CoincidentPointsStayFiniteThroughTheFloor) {
  EnsembleMemory memory;
  memory.sets.push_back(Tensor::matrix(1, 2, {1.0, 2.0}));
  const double eps = 1e-6;
  const double theta =
      theta_value(memory, Tensor::matrix(1, 2, {1.0, 2.0}), 1.0, eps);
  EXPECT_TRUE(std::isfinite(theta));
  EXPECT_DOUBLE_EQ(theta, 1.0 / eps);
}

TEST(Theta, MatchesBruteForceOracleOnRandomInstances) {
  Rng rng(101);
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    const std::size_t sets = 1 + rng.below(3);
    EnsembleMemory memory;
    std::size_t remaining = 10;
    for (std::size_t s = 0; s < sets; ++s) {
      const std::size_t rows =
          s + 1 == sets ? remaining : 1 + rng.below(remaining - (sets - s - 1));
      remaining -= rows;
      Tensor q = rng_standard_normal({rows, d}, rng);
      memory.sets.push_back(q);
      if (remaining == 0) break;
    }
    const std::size_t b = 1 + rng.below(20);
    const Tensor fakes = rng_standard_normal({b, d}, rng);
    const double lambda = rng.uniform(0.05, 2.0);
    const double expected =
        theta_oracle(memory.sets, fakes, lambda, 1e-6);
    EXPECT_NEAR(theta_value(memory, fakes, lambda, 1e-6), expected, 1e-9);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  EXPECT_LT(elapsed, 1.0);
}

TEST(Theta, LinearInLambda) {
  Rng rng(7);
  EnsembleMemory memory;
  memory.sets.push_back(rng_standard_normal({4, 3}, rng));
  const Tensor fakes = rng_standard_normal({5, 3}, rng);
  const double base = theta_value(memory, fakes, 0.3, 1e-6);
  EXPECT_NEAR(theta_value(memory, fakes, 0.6, 1e-6), 2.0 * base, 1e-12);
  EXPECT_NEAR(theta_value(memory, fakes, 1.5, 1e-6), 5.0 * base, 1e-12);
}

TEST(Theta, StrictlyDecreasesWhenOneDistanceGrows) {
  EnsembleMemory memory;
  memory.sets.push_back(Tensor::matrix(1, 2, {0.0, 0.0}));
  const double near =
      theta_value(memory, Tensor::matrix(2, 2, {1, 0, 0, 1}), 1.0, 1e-6);
  const double far =
      theta_value(memory, Tensor::matrix(2, 2, {1, 0, 0, 2}), 1.0, 1e-6);
  EXPECT_LT(far, near);
}

TEST(Theta, GradientPassesFiniteDifferences) {
  Rng rng(23);
  const Tensor memory = rng_standard_normal({6, 2}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor fakes = rng_standard_normal({4, 2}, rng);
    const double err = grad_check(
        [&](Tape&, const std::vector<Tensor>& p) {
          return theta_penalty(p[0], memory, 0.7, 1e-6);
        },
        {fakes}, 1e-5);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(RegularizedLoss, LambdaZeroReducesToAdversarialTerm) {
  Rng rng(3);
  EnsembleMemory memory;
  memory.sets.push_back(rng_standard_normal({4, 2}, rng));
  Tape tape;
  const Tensor d_fake = tape.leaf(Tensor({3}, {0.4, 0.5, 0.6}));
  const Tensor fakes = tape.leaf(rng_standard_normal({3, 2}, rng));
  const double base =
      gan_loss_generator(d_fake, GenLossMode::NonSaturating).value();
  const double reg = regularized_generator_loss(
                         d_fake, fakes, memory, 0.0,
                         GenLossMode::NonSaturating)
                         .value();
  EXPECT_DOUBLE_EQ(reg, base);
}

TEST(RegularizedLoss, EmptyMemoryReducesToAdversarialTerm) {
  Tape tape;
  const Tensor d_fake = tape.leaf(Tensor({2}, {0.4, 0.6}));
  const Tensor fakes = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const EnsembleMemory memory;
  EXPECT_DOUBLE_EQ(
      regularized_generator_loss(d_fake, fakes, memory, 0.5,
                                 GenLossMode::NonSaturating)
          .value(),
      gan_loss_generator(d_fake, GenLossMode::NonSaturating).value());
}

TEST(RegularizedLoss, ComposedHandCase) {
  EnsembleMemory memory;
  memory.sets.push_back(Tensor::matrix(2, 2, {0, 0, 1, 0}));
  const double lambda = 0.4;
  Tape tape;
  const Tensor d_fake = tape.leaf(Tensor({2}, {0.5, 0.5}));
  const Tensor fakes = tape.leaf(Tensor::matrix(1, 2, {0, 1}));
  const double expected =
      std::numbers::ln2 + lambda * 2.0 / (1.0 + std::numbers::sqrt2);
  EXPECT_NEAR(regularized_generator_loss(d_fake, fakes, memory, lambda,
                                         GenLossMode::NonSaturating)
                  .value(),
              expected, 1e-9);
}

TEST(FitDensity, HandMomentsWithPopulationVariance) {
  const DensityEstimator est =
      fit_density(Tensor::matrix(2, 1, {1.0, 3.0}), 1e-6);
  EXPECT_DOUBLE_EQ(est.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(est.stddev[0], 1.0);
}

TEST(FitDensity, IdenticalSamplesHitTheFloor) {
  const DensityEstimator est =
      fit_density(Tensor::matrix(3, 2, {4, 5, 4, 5, 4, 5}), 1e-6);
  for (double s : est.stddev) EXPECT_DOUBLE_EQ(s, std::sqrt(1e-6));
}

TEST(FitDensity, SingleSampleRejected) {
  EXPECT_THROW(fit_density(Tensor::matrix(1, 2, {1, 2}), 1e-6),
               std::invalid_argument);
}

TEST(DensityLogpdf, StandardNormalAnchors) {
  DensityEstimator est;
  est.mean = {0.0};
  est.stddev = {1.0};
  EXPECT_NEAR(density_logpdf(est, std::vector<double>{0.0}), -0.918939, 1e-6);
  EXPECT_NEAR(density_logpdf(est, std::vector<double>{1.0}), -1.418939, 1e-6);
}

TEST(DensityLogpdf, SeparableAcrossDimensions) {
  DensityEstimator est;
  est.mean = {1.0, 2.0, 3.0};
  est.stddev = {1.0, 1.0, 1.0};
  EXPECT_NEAR(density_logpdf(est, std::vector<double>{1.0, 2.0, 3.0}),
              3 * -0.918939, 1e-5);
  EXPECT_THROW(density_logpdf(est, std::vector<double>{1.0}),
               std::invalid_argument);
}

GeneratorEnsemble estimators_only(std::vector<DensityEstimator> ests) {
  GeneratorEnsemble ensemble;
  ensemble.generators.resize(ests.size());
  ensemble.estimators = std::move(ests);
  return ensemble;
}

DensityEstimator normal1d(double mean, double stddev) {
  DensityEstimator est;
  est.mean = {mean};
  est.stddev = {stddev};
  return est;
}

TEST(Selection, IdenticalEstimatorsSplitEvenly) {
  const GeneratorEnsemble ensemble =
      estimators_only({normal1d(1.0, 2.0), normal1d(1.0, 2.0)});
  SelectionState state;
  state.generated = {{0.5}, {2.0}, {-3.0}};
  const std::vector<double> probs = selection_probabilities(ensemble, state);
  EXPECT_NEAR(probs[0], 0.5, 1e-12);
  EXPECT_NEAR(probs[1], 0.5, 1e-12);
}

TEST(Selection, EmptyHistoryIsUniform) {
  const GeneratorEnsemble ensemble = estimators_only(
      {normal1d(0, 1), normal1d(5, 1), normal1d(-5, 1)});
  const std::vector<double> probs =
      selection_probabilities(ensemble, SelectionState{});
  for (double p : probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(Selection, WorkedOneDimensionalExample) {
  const GeneratorEnsemble ensemble =
      estimators_only({normal1d(0, 1), normal1d(5, 1)});
  SelectionState state;
  state.generated = {{0.0}};
  const std::vector<double> probs = selection_probabilities(ensemble, state);
  EXPECT_NEAR(probs[0], 0.4016, 1e-3);
  EXPECT_NEAR(probs[1], 0.5984, 1e-3);
}

// Literal product-form evaluation of the selection rule in extended
// precision.
std::vector<double> selection_oracle(
    const std::vector<DensityEstimator>& estimators,
    const std::vector<std::vector<double>>& generated) {
  std::vector<long double> weights(estimators.size(), 1.0L);
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    for (const auto& g : generated) {
      weights[i] *= expl(1.0L - static_cast<long double>(
                                    density_pdf(estimators[i], g)));
    }
  }
  long double total = 0.0L;
  for (long double w : weights) total += w;
  std::vector<double> probs(estimators.size());
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    probs[i] = static_cast<double>(weights[i] / total);
  }
  return probs;
}

TEST(Selection, MatchesLiteralProductOracle) {
  Rng rng(55);
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng.below(4);
    const std::size_t d = 1 + rng.below(3);
    std::vector<DensityEstimator> estimators(k);
    for (auto& est : estimators) {
      for (std::size_t j = 0; j < d; ++j) {
        est.mean.push_back(rng.uniform(-3, 3));
        est.stddev.push_back(rng.uniform(0.5, 2.0));
      }
    }
    SelectionState state;
    const std::size_t p = rng.below(51);
    for (std::size_t s = 0; s < p; ++s) {
      std::vector<double> g(d);
      for (double& v : g) v = rng.uniform(-4, 4);
      state.generated.push_back(std::move(g));
    }
    const GeneratorEnsemble ensemble = estimators_only(estimators);
    const std::vector<double> expected =
        selection_oracle(estimators, state.generated);
    const std::vector<double> got = selection_probabilities(ensemble, state);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_NEAR(got[i], expected[i], 1e-9);
    }
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  EXPECT_LT(elapsed, 1.0);
}

TEST(Selection, SumsToOneAndIgnoresOrder) {
  Rng rng(77);
  const GeneratorEnsemble ensemble = estimators_only(
      {normal1d(0, 1), normal1d(2, 0.7), normal1d(-1, 1.5)});
  SelectionState state;
  for (int i = 0; i < 20; ++i) state.generated.push_back({rng.uniform(-3, 3)});
  const std::vector<double> probs = selection_probabilities(ensemble, state);
  double total = 0.0;
  for (double p : probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);

  SelectionState reversed;
  reversed.generated.assign(state.generated.rbegin(), state.generated.rend());
  const std::vector<double> probs_rev =
      selection_probabilities(ensemble, reversed);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    EXPECT_NEAR(probs[i], probs_rev[i], 1e-12);
  }
}

TEST(Selection, HigherDensitySumMeansLowerProbability) {
  const GeneratorEnsemble ensemble =
      estimators_only({normal1d(0, 1), normal1d(5, 1)});
  SelectionState state;
  state.generated = {{0.2}, {-0.4}};  // both near the first estimator
  const std::vector<double> probs = selection_probabilities(ensemble, state);
  EXPECT_LT(probs[0], probs[1]);
}

TEST(Selection, EqualDensityPointLeavesProbabilitiesUnchanged) {
  const GeneratorEnsemble ensemble =
      estimators_only({normal1d(0, 1), normal1d(5, 1)});
  SelectionState state;
  state.generated = {{0.7}};
  const std::vector<double> before = selection_probabilities(ensemble, state);
  state.generated.push_back({2.5});  // equidistant from both means
  const std::vector<double> after = selection_probabilities(ensemble, state);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(before[i], after[i], 1e-12);
  }
}

EnsembleConfig tiny_ensemble_config(std::size_t k) {
  EnsembleConfig config;
  config.k = k;
  config.m = 16;
  config.lambda = 0.5;
  config.stage.steps = 25;
  config.stage.batch_size = 8;
  config.stage.noise_dim = 2;
  config.stage.g_hidden = {8};
  config.stage.d_hidden = {8};
  return config;
}

TEST(Boosting, SingleStageMatchesPlainGanBitForBit) {
  Rng data_rng(88);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  const EnsembleConfig config = tiny_ensemble_config(1);
  Rng a(4), b(4);
  const GeneratorEnsemble ensemble = train_boosted_ensemble(data, config, a);
  const TrainedGan plain = train_gan(data, config.stage, b);
  ASSERT_EQ(ensemble.size(), 1u);
  for (std::size_t i = 0; i < plain.gen.net.weights.size(); ++i) {
    EXPECT_EQ(ensemble.generators[0].net.weights[i].values(),
              plain.gen.net.weights[i].values());
  }
}

TEST(Boosting, StructureContract) {
  Rng data_rng(89);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  EnsembleConfig config = tiny_ensemble_config(3);
  Rng rng(5);
  const GeneratorEnsemble ensemble = train_boosted_ensemble(data, config, rng);
  ASSERT_EQ(ensemble.size(), 3u);
  ASSERT_EQ(ensemble.memory.sets.size(), 3u);
  ASSERT_EQ(ensemble.estimators.size(), 3u);
  for (const Tensor& q : ensemble.memory.sets) {
    EXPECT_EQ(q.rows(), config.m);
    EXPECT_EQ(q.cols(), 2u);
  }
}

TEST(Boosting, InvalidConfigRejected) {
  Rng data_rng(90);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 100, data_rng);
  EnsembleConfig config = tiny_ensemble_config(2);
  config.m = 1;
  Rng rng(1);
  EXPECT_THROW(train_boosted_ensemble(data, config, rng),
               std::invalid_argument);
  config = tiny_ensemble_config(0);
  EXPECT_THROW(train_boosted_ensemble(data, config, rng),
               std::invalid_argument);
}

TEST(EnsembleSample, CountsAndDegenerateCases) {
  Rng data_rng(91);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  Rng rng(6);
  const GeneratorEnsemble ensemble =
      train_boosted_ensemble(data, tiny_ensemble_config(2), rng);

  Rng sampler(3);
  const Tensor none = ensemble_sample(ensemble, 0, sampler);
  EXPECT_EQ(none.rows(), 0u);

  std::vector<std::size_t> usage;
  const Tensor out = ensemble_sample(ensemble, 40, sampler, &usage);
  EXPECT_EQ(out.rows(), 40u);
  EXPECT_EQ(usage.size(), 2u);
  EXPECT_EQ(usage[0] + usage[1], 40u);
}

TEST(EnsembleSample, SingleGeneratorTakesEveryDraw) {
  Rng data_rng(92);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  Rng rng(7);
  const GeneratorEnsemble ensemble =
      train_boosted_ensemble(data, tiny_ensemble_config(1), rng);
  Rng sampler(4);
  std::vector<std::size_t> usage;
  ensemble_sample(ensemble, 25, sampler, &usage);
  EXPECT_EQ(usage[0], 25u);
}

TEST(EnsembleSample, DeterministicUnderSeed) {
  Rng data_rng(93);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  Rng rng(8);
  const GeneratorEnsemble ensemble =
      train_boosted_ensemble(data, tiny_ensemble_config(2), rng);
  Rng a(11), b(11);
  EXPECT_EQ(ensemble_sample(ensemble, 30, a).values(),
            ensemble_sample(ensemble, 30, b).values());
}

TEST(EnsembleCheckpoint, DirectoryRoundTrip) {
  Rng data_rng(94);
  const GroupedDataset data = make_two_mode_mixture({0.5, 0.5}, 200, data_rng);
  Rng rng(9);
  const GeneratorEnsemble ensemble =
      train_boosted_ensemble(data, tiny_ensemble_config(2), rng);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "ganfair_ens_ckpt").string();
  std::filesystem::remove_all(dir);
  save_ensemble(ensemble, dir);
  const GeneratorEnsemble loaded = load_ensemble(dir);
  ASSERT_EQ(loaded.size(), ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    for (std::size_t w = 0; w < ensemble.generators[i].net.weights.size(); ++w) {
      EXPECT_EQ(loaded.generators[i].net.weights[w].values(),
                ensemble.generators[i].net.weights[w].values());
    }
    EXPECT_EQ(loaded.memory.sets[i].values(),
              ensemble.memory.sets[i].values());
    EXPECT_EQ(loaded.estimators[i].mean, ensemble.estimators[i].mean);
    EXPECT_EQ(loaded.estimators[i].stddev, ensemble.estimators[i].stddev);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ganfair
