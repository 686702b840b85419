#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/dataset.hpp"
#include "ganfair/gan.hpp"
#include "ganfair/random.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

struct EnsembleConfig {
  std::size_t k = 4;           // ensemble size
  std::size_t m = 50;          // memory samples per generator
  double lambda = 0.1;         // regularizer scale
  TrainConfig stage;           // per-stage training settings
  double eps_var = 1e-6;       // variance floor for density fits
  double eps_dist = 1e-6;      // distance floor inside the regularizer

  void validate() const {
    if (k < 1) throw std::invalid_argument("ensemble config: k must be >= 1");
    if (m < 2) throw std::invalid_argument("ensemble config: m must be >= 2");
    if (!(lambda > 0.0)) {
      throw std::invalid_argument("ensemble config: lambda must be > 0");
    }
    if (!(eps_var > 0.0) || !(eps_dist > 0.0)) {
      throw std::invalid_argument("ensemble config: floors must be > 0");
    }
    stage.validate();
  }
};

// Ordered memory sets Q_1..Q_{i-1}; each holds the m samples stored from one
// trained generator.
struct EnsembleMemory {
  std::vector<Tensor> sets;

  bool empty() const { return sets.empty(); }

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const Tensor& q : sets) n += q.rows();
    return n;
  }

  // All stored points stacked into one matrix.
  Tensor flattened() const {
    if (sets.empty()) return Tensor();
    const std::size_t d = sets.front().cols();
    std::vector<double> values;
    values.reserve(total_points() * d);
    for (const Tensor& q : sets) {
      if (q.cols() != d) {
        throw std::invalid_argument("ensemble memory: inconsistent dims");
      }
      values.insert(values.end(), q.values().begin(), q.values().end());
    }
    return Tensor({total_points(), d}, std::move(values));
  }
};

// ---------------------------------------------------------------------------
// Distance regularizer: Theta = Phi(Q) / sum over pairs of max(|x - f|, eps)
// with Phi = lambda * pair count, i.e. lambda over the mean pairwise
// distance. Differentiable w.r.t. the fake batch; stored points are constant.
// ---------------------------------------------------------------------------

inline Tensor theta_penalty(const Tensor& fakes, const Tensor& memory_points,
                            double lambda, double eps_dist) {
  Tape& tape = detail::own_tape(fakes, "theta");
  detail::require_nonempty(fakes, "theta");
  if (memory_points.empty()) return tape.constant(0.0);
  if (fakes.shape().size() != 2 || memory_points.shape().size() != 2 ||
      fakes.cols() != memory_points.cols()) {
    throw std::invalid_argument("theta: fakes and memory dims disagree");
  }
  if (!(eps_dist > 0.0)) {
    throw std::invalid_argument("theta: eps_dist must be > 0");
  }
  const std::size_t b = fakes.rows(), d = fakes.cols();
  const std::size_t mq = memory_points.rows();
  const std::vector<double>& fv = fakes.values();
  const std::vector<double>& qv = memory_points.values();

  double s = 0.0;
  for (std::size_t x = 0; x < mq; ++x) {
    for (std::size_t r = 0; r < b; ++r) {
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = qv[x * d + j] - fv[r * d + j];
        sq += delta * delta;
      }
      s += std::max(std::sqrt(sq), eps_dist);
    }
  }
  const double phi = lambda * static_cast<double>(mq * b);
  const double theta = phi / s;

  std::vector<double> fcopy = fv, qcopy = qv;
  const int nf = fakes.node();
  return tape.emplace(
      "theta", {1}, {theta}, {nf},
      [b, d, mq, nf, s, phi, eps_dist, fcopy = std::move(fcopy),
       qcopy = std::move(qcopy)](const std::vector<double>& g,
                                 std::vector<std::vector<double>>& grads) {
        auto& gf = grads[nf];
        if (gf.empty()) gf.assign(b * d, 0.0);
        const double outer = -g[0] * phi / (s * s);
        for (std::size_t r = 0; r < b; ++r) {
          for (std::size_t x = 0; x < mq; ++x) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double delta = qcopy[x * d + j] - fcopy[r * d + j];
              sq += delta * delta;
            }
            const double dist = std::sqrt(sq);
            if (dist < eps_dist) continue;  // flooring cuts the gradient
            const double scale = outer / dist;
            for (std::size_t j = 0; j < d; ++j) {
              gf[r * d + j] +=
                  scale * (fcopy[r * d + j] - qcopy[x * d + j]);
            }
          }
        }
      });
}

inline Tensor theta_regularizer(const EnsembleMemory& memory,
                                const Tensor& fakes, double lambda,
                                double eps_dist) {
  if (memory.empty()) {
    return detail::own_tape(fakes, "theta").constant(0.0);
  }
  return theta_penalty(fakes, memory.flattened(), lambda, eps_dist);
}

// Generator loss with the distance term added (the boosted stage objective).
inline Tensor regularized_generator_loss(const Tensor& d_fake,
                                         const Tensor& fakes,
                                         const EnsembleMemory& memory,
                                         double lambda, GenLossMode mode,
                                         double eps_dist = 1e-6) {
  const Tensor base = gan_loss_generator(d_fake, mode);
  if (memory.empty()) return base;
  return add(base, theta_penalty(fakes, memory.flattened(), lambda, eps_dist));
}

// ---------------------------------------------------------------------------
// Per-generator density estimate: diagonal Normal with population moments
// from the stored samples; variances floored at eps_var.
// ---------------------------------------------------------------------------

struct DensityEstimator {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dim() const { return mean.size(); }
};

inline DensityEstimator fit_density(const Tensor& q, double eps_var) {
  if (q.shape().size() != 2) {
    throw std::invalid_argument("fit_density: samples must be 2-d");
  }
  const std::size_t m = q.rows(), d = q.cols();
  if (m < 2) {
    throw std::invalid_argument("fit_density: need at least 2 samples");
  }
  if (!(eps_var > 0.0)) {
    throw std::invalid_argument("fit_density: eps_var must be > 0");
  }
  DensityEstimator est;
  est.mean.assign(d, 0.0);
  est.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) est.mean[j] += q(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) est.mean[j] /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = q(i, j) - est.mean[j];
      est.stddev[j] += delta * delta;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    est.stddev[j] = std::sqrt(
        std::max(est.stddev[j] / static_cast<double>(m), eps_var));
  }
  return est;
}

inline double density_logpdf(const DensityEstimator& est,
                             std::span<const double> x) {
  if (x.size() != est.dim()) {
    throw std::invalid_argument("density_logpdf: dimension mismatch");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2*pi)/2
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = (x[j] - est.mean[j]) / est.stddev[j];
    acc += -kHalfLog2Pi - std::log(est.stddev[j]) - 0.5 * z * z;
  }
  return acc;
}

inline double density_pdf(const DensityEstimator& est,
                          std::span<const double> x) {
  return std::exp(density_logpdf(est, x));
}

// ---------------------------------------------------------------------------
// Ensemble and test-time selection
// ---------------------------------------------------------------------------

struct GeneratorEnsemble {
  std::vector<Generator> generators;
  EnsembleMemory memory;
  std::vector<DensityEstimator> estimators;
  EnsembleConfig config;

  std::size_t size() const { return generators.size(); }
  std::size_t dim() const {
    return generators.empty() ? 0 : generators.front().net.output_width();
  }
};

// Samples already drawn in the current sampling session.
struct SelectionState {
  std::vector<std::vector<double>> generated;
};

namespace detail {

// Softmax over log-weights log w_i = p - sum_i where sum_i = sum over the
// generated set of P_i(g); p cancels but is kept for the literal form.
inline std::vector<double> selection_from_sums(
    const std::vector<double>& density_sums, std::size_t generated_count) {
  const std::size_t k = density_sums.size();
  std::vector<double> logw(k);
  for (std::size_t i = 0; i < k; ++i) {
    logw[i] = static_cast<double>(generated_count) - density_sums[i];
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> probs(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    probs[i] = std::exp(logw[i] - top);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

}  // namespace detail

// Probability of picking each generator next: softmax over the count of
// "no point here" evidence, down-weighting generators whose estimated
// density is high at the already-generated samples.
inline std::vector<double> selection_probabilities(
    const GeneratorEnsemble& ensemble, const SelectionState& state) {
  const std::size_t k = ensemble.size();
  if (k == 0) {
    throw std::invalid_argument("selection_probabilities: empty ensemble");
  }
  std::vector<double> sums(k, 0.0);
  for (const auto& sample : state.generated) {
    for (std::size_t i = 0; i < k; ++i) {
      sums[i] += density_pdf(ensemble.estimators[i], sample);
    }
  }
  return detail::selection_from_sums(sums, state.generated.size());
}

// Sequential boosting: each stage trains a fresh generator/discriminator
// pair whose generator loss carries the distance term against all stored
// samples, then banks m samples and fits that stage's density estimate.
inline GeneratorEnsemble train_boosted_ensemble(const GroupedDataset& data,
                                                const EnsembleConfig& config,
                                                Rng& rng) {
  config.validate();
  GeneratorEnsemble ensemble;
  ensemble.config = config;
  for (std::size_t i = 0; i < config.k; ++i) {
    GenPenaltyHook hook;
    if (!ensemble.memory.empty()) {
      Tensor flat = ensemble.memory.flattened();
      const double lambda = config.lambda;
      const double eps_dist = config.eps_dist;
      hook = [flat = std::move(flat), lambda, eps_dist](const Tensor& fakes) {
        return theta_penalty(fakes, flat, lambda, eps_dist);
      };
    }
    TrainedGan stage = train_gan(data, config.stage, rng, hook);
    ensemble.generators.push_back(std::move(stage.gen));
    Tensor q = sample_generator(ensemble.generators.back(), config.m, rng);
    ensemble.estimators.push_back(fit_density(q, config.eps_var));
    ensemble.memory.sets.push_back(std::move(q));
  }
  return ensemble;
}

// Draws n samples one at a time, re-picking the generator from the selection
// rule after every draw. Density sums are accumulated in draw order, which
// matches a fresh recompute exactly.
inline Tensor ensemble_sample(const GeneratorEnsemble& ensemble, std::size_t n,
                              Rng& rng,
                              std::vector<std::size_t>* usage_counts = nullptr) {
  const std::size_t k = ensemble.size();
  if (k == 0) throw std::invalid_argument("ensemble_sample: empty ensemble");
  const std::size_t d = ensemble.dim();
  if (usage_counts) usage_counts->assign(k, 0);
  std::vector<double> values;
  values.reserve(n * d);
  std::vector<double> density_sums(k, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const std::vector<double> probs =
        detail::selection_from_sums(density_sums, t);
    const std::size_t pick = rng.categorical(probs);
    if (usage_counts) (*usage_counts)[pick] += 1;
    const Tensor sample = sample_generator(ensemble.generators[pick], 1, rng);
    for (std::size_t i = 0; i < k; ++i) {
      density_sums[i] += density_pdf(
          ensemble.estimators[i],
          std::span<const double>(sample.values().data(), d));
    }
    values.insert(values.end(), sample.values().begin(), sample.values().end());
  }
  return Tensor({n, d}, std::move(values));
}

// ---------------------------------------------------------------------------
// Ensemble checkpoint directory: generator_<i>.txt per generator (1-based),
// memory_<i>.csv per stored set, and estimators.csv (gen_id,dim,mean,std).
// ---------------------------------------------------------------------------

inline void save_ensemble(const GeneratorEnsemble& ensemble,
                          const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    save_mlp(ensemble.generators[i].net,
             (fs::path(dir) / ("generator_" + std::to_string(i + 1) + ".txt"))
                 .string());
    const Tensor& q = ensemble.memory.sets[i];
    write_samples_csv(
        q, std::vector<int>(q.rows(), static_cast<int>(i)),
        (fs::path(dir) / ("memory_" + std::to_string(i + 1) + ".csv"))
            .string());
  }
  std::ofstream os((fs::path(dir) / "estimators.csv").string());
  if (!os) {
    throw std::runtime_error("save_ensemble: cannot write estimators.csv");
  }
  os << "gen_id,dim,mean,std\n";
  char buf[96];
  for (std::size_t i = 0; i < ensemble.estimators.size(); ++i) {
    const DensityEstimator& est = ensemble.estimators[i];
    for (std::size_t j = 0; j < est.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g", i + 1, j,
                    est.mean[j], est.stddev[j]);
      os << buf << '\n';
    }
  }
}

inline GeneratorEnsemble load_ensemble(const std::string& dir) {
  namespace fs = std::filesystem;
  GeneratorEnsemble ensemble;
  for (std::size_t i = 1;; ++i) {
    const fs::path model =
        fs::path(dir) / ("generator_" + std::to_string(i) + ".txt");
    if (!fs::exists(model)) break;
    Generator gen;
    gen.net = load_mlp(model.string());
    gen.noise_dim = gen.net.input_width();
    ensemble.generators.push_back(std::move(gen));
    const auto memory = read_samples_csv(
        (fs::path(dir) / ("memory_" + std::to_string(i) + ".csv")).string());
    ensemble.memory.sets.push_back(memory.samples);
  }
  if (ensemble.generators.empty()) {
    throw std::runtime_error("load_ensemble: no generators under " + dir);
  }
  std::ifstream is((fs::path(dir) / "estimators.csv").string());
  if (!is) {
    throw std::runtime_error("load_ensemble: missing estimators.csv");
  }
  std::string line;
  std::getline(is, line);  // header
  ensemble.estimators.resize(ensemble.generators.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    const std::size_t gen_id = std::stoul(cell);
    std::getline(ls, cell, ',');
    const std::size_t dim = std::stoul(cell);
    DensityEstimator& est = ensemble.estimators.at(gen_id - 1);
    if (est.mean.size() <= dim) {
      est.mean.resize(dim + 1);
      est.stddev.resize(dim + 1);
    }
    std::getline(ls, cell, ',');
    est.mean[dim] = std::stod(cell);
    std::getline(ls, cell, ',');
    est.stddev[dim] = std::stod(cell);
  }
  return ensemble;
}

}  // namespace ganfair
