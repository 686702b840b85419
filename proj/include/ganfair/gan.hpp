#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/adam.hpp"
#include "ganfair/dataset.hpp"
#include "ganfair/mlp.hpp"
#include "ganfair/random.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

// Probabilities are pushed into [kProbClamp, 1 - kProbClamp] before any log.
constexpr double kProbClamp = 1e-7;

enum class GenLossMode { NonSaturating, LiteralSaturating };

inline const char* gen_loss_mode_name(GenLossMode mode) {
  return mode == GenLossMode::NonSaturating ? "non_saturating"
                                            : "literal_saturating";
}

inline GenLossMode parse_gen_loss_mode(const std::string& name) {
  if (name == "non_saturating") return GenLossMode::NonSaturating;
  if (name == "literal_saturating") return GenLossMode::LiteralSaturating;
  throw std::invalid_argument("parse_gen_loss_mode: unknown mode '" + name +
                              "'");
}

struct TrainConfig {
  std::size_t steps = 3000;
  std::size_t batch_size = 64;
  std::size_t noise_dim = 2;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t d_steps = 1;
  GenLossMode gen_loss = GenLossMode::NonSaturating;
  std::uint64_t seed = 0;
  std::vector<std::size_t> g_hidden = {32, 32};
  std::vector<std::size_t> d_hidden = {32, 32};

  void validate() const {
    if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
    if (batch_size < 2) {
      throw std::invalid_argument("train config: batch size must be >= 2");
    }
    if (!(lr_g > 0.0) || !(lr_d > 0.0)) {
      throw std::invalid_argument("train config: learning rates must be > 0");
    }
    if (noise_dim == 0) {
      throw std::invalid_argument("train config: noise dim must be >= 1");
    }
    if (d_steps < 1) {
      throw std::invalid_argument("train config: d_steps must be >= 1");
    }
  }
};

// -E[log D(x)] - E[log(1 - D(G(z)))], the discriminator's descent form of the
// minimax value function.
inline Tensor gan_loss_discriminator(const Tensor& d_real,
                                     const Tensor& d_fake) {
  detail::require_nonempty(d_real, "gan_loss_discriminator");
  detail::require_nonempty(d_fake, "gan_loss_discriminator");
  Tape& tape = detail::same_tape(d_real, d_fake, "gan_loss_discriminator");
  const Tensor real = clamp(d_real, kProbClamp, 1.0 - kProbClamp);
  const Tensor fake = clamp(d_fake, kProbClamp, 1.0 - kProbClamp);
  const Tensor ones =
      tape.constant(fake.shape(), std::vector<double>(fake.size(), 1.0));
  return neg(add(mean(log(real)), mean(log(sub(ones, fake)))));
}

// Non-saturating: -E[log D(G(z))]. Literal-saturating keeps the printed
// generator objective -E[log(1 - D(G(z)))] for fidelity experiments.
inline Tensor gan_loss_generator(const Tensor& d_fake, GenLossMode mode) {
  detail::require_nonempty(d_fake, "gan_loss_generator");
  Tape& tape = detail::own_tape(d_fake, "gan_loss_generator");
  const Tensor fake = clamp(d_fake, kProbClamp, 1.0 - kProbClamp);
  if (mode == GenLossMode::NonSaturating) {
    return neg(mean(log(fake)));
  }
  const Tensor ones =
      tape.constant(fake.shape(), std::vector<double>(fake.size(), 1.0));
  return neg(mean(log(sub(ones, fake))));
}

struct StepRecord {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mean_d_fake = 0.0;
};

// Trained generator with its sampling contract: groups == 0 means
// unconditional, otherwise inputs carry a one-hot group suffix and
// label_proportions drives unconditional draws.
struct Generator {
  MlpNetwork net;
  std::size_t noise_dim = 0;
  std::size_t groups = 0;
  std::vector<double> label_proportions;

  bool conditional() const { return groups > 0; }
};

struct TrainedGan {
  Generator gen;
  MlpNetwork disc;
  std::vector<StepRecord> history;
  TrainConfig config;
};

using TrainedCGan = TrainedGan;

// Optional extra generator-loss term built on the step's tape from the
// current fake batch (used by the boosted ensemble's distance regularizer).
using GenPenaltyHook = std::function<Tensor(const Tensor& fakes)>;

namespace detail {

inline std::vector<std::size_t> mlp_sizes(std::size_t in,
                                          const std::vector<std::size_t>& hidden,
                                          std::size_t out) {
  std::vector<std::size_t> sizes = {in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

inline std::vector<int> draw_labels(const std::vector<double>& proportions,
                                    std::size_t n, Rng& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(rng.categorical(proportions));
  }
  return labels;
}

struct ParamRefs {
  std::vector<Tensor*> params;
  std::vector<Tensor> grads;
};

inline ParamRefs collect(MlpNetwork& net, const BoundMlp& bound,
                         const GradientMap& grads) {
  ParamRefs refs;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    refs.params.push_back(&net.weights[i]);
    refs.grads.push_back(grads.at(bound.weights[i]));
    refs.params.push_back(&net.biases[i]);
    refs.grads.push_back(grads.at(bound.biases[i]));
  }
  return refs;
}

// Shared GAN/CGAN loop. Conditional mode concatenates true labels on the real
// side and labels drawn from the declared proportions on the fake side.
inline TrainedGan train_gan_core(const GroupedDataset& data,
                                 const TrainConfig& config, Rng& rng,
                                 bool conditional,
                                 const GenPenaltyHook& gen_penalty) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  const std::size_t d = data.dim();
  const std::size_t k = data.groups();
  const std::size_t cond = conditional ? k : 0;

  TrainedGan trained;
  trained.config = config;
  trained.gen.noise_dim = config.noise_dim;
  trained.gen.groups = cond;
  trained.gen.label_proportions = conditional ? data.proportions
                                              : std::vector<double>{};
  trained.gen.net = mlp_init(
      mlp_sizes(config.noise_dim + cond, config.g_hidden, d),
      Activation::Tanh, Activation::Identity, rng);
  trained.disc = mlp_init(mlp_sizes(d + cond, config.d_hidden, 1),
                          Activation::LeakyRelu, Activation::Sigmoid, rng);
  MlpNetwork& g_net = trained.gen.net;
  MlpNetwork& d_net = trained.disc;

  AdamState g_state(config.lr_g, config.beta1, config.beta2, config.adam_eps);
  AdamState d_state(config.lr_d, config.beta1, config.beta2, config.adam_eps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    StepRecord record;
    try {
      for (std::size_t ds = 0; ds < config.d_steps; ++ds) {
        const Batch batch = minibatch(data, config.batch_size, rng);
        const Tensor noise =
            rng_standard_normal({config.batch_size, config.noise_dim}, rng);
        const std::vector<int> fake_labels =
            conditional ? draw_labels(data.proportions, config.batch_size, rng)
                        : std::vector<int>{};

        Tape tape;
        const BoundMlp bd = bind_mlp(tape, d_net, true);
        const BoundMlp bg = bind_mlp(tape, g_net, false);
        Tensor x = tape.leaf(batch.samples, false);
        Tensor z = tape.leaf(noise, false);
        if (conditional) {
          x = append_onehot(x, batch.labels, k);
          z = append_onehot(z, fake_labels, k);
        }
        Tensor fake = mlp_apply(bg, z);
        if (conditional) fake = append_onehot(fake, fake_labels, k);
        const Tensor d_real = mlp_apply(bd, x);
        const Tensor d_fake = mlp_apply(bd, fake);
        const Tensor loss = gan_loss_discriminator(d_real, d_fake);
        record.d_loss = loss.value();
        const GradientMap grads = tape.backward(loss);
        ParamRefs refs = collect(d_net, bd, grads);
        adam_step(refs.params, refs.grads, d_state);
      }

      {
        const Tensor noise =
            rng_standard_normal({config.batch_size, config.noise_dim}, rng);
        const std::vector<int> fake_labels =
            conditional ? draw_labels(data.proportions, config.batch_size, rng)
                        : std::vector<int>{};

        Tape tape;
        const BoundMlp bg = bind_mlp(tape, g_net, true);
        const BoundMlp bd = bind_mlp(tape, d_net, false);
        Tensor z = tape.leaf(noise, false);
        if (conditional) z = append_onehot(z, fake_labels, k);
        const Tensor fakes = mlp_apply(bg, z);
        Tensor d_in = fakes;
        if (conditional) d_in = append_onehot(d_in, fake_labels, k);
        const Tensor d_fake = mlp_apply(bd, d_in);
        Tensor loss = gan_loss_generator(d_fake, config.gen_loss);
        if (gen_penalty) {
          loss = add(loss, gen_penalty(fakes));
        }
        record.g_loss = loss.value();
        double acc = 0.0;
        for (double v : d_fake.values()) acc += v;
        record.mean_d_fake = acc / static_cast<double>(d_fake.size());
        const GradientMap grads = tape.backward(loss);
        ParamRefs refs = collect(g_net, bg, grads);
        adam_step(refs.params, refs.grads, g_state);
      }
    } catch (const numeric_error& err) {
      throw numeric_error("train: diverged at step " + std::to_string(step) +
                          " (" + err.what() + ")");
    }
    trained.history.push_back(record);
  }
  return trained;
}

}  // namespace detail

inline TrainedGan train_gan(const GroupedDataset& data,
                            const TrainConfig& config, Rng& rng,
                            const GenPenaltyHook& gen_penalty = {}) {
  return detail::train_gan_core(data, config, rng, false, gen_penalty);
}

inline TrainedCGan train_cgan(const GroupedDataset& data,
                              const TrainConfig& config, Rng& rng) {
  if (data.groups() < 2) {
    throw std::invalid_argument("train_cgan: dataset must declare >= 2 groups");
  }
  return detail::train_gan_core(data, config, rng, true, {});
}

// n forward passes on fresh noise. A condition is required exactly when the
// generator is conditional.
inline Tensor sample_generator(const Generator& gen, std::size_t n, Rng& rng,
                               std::optional<int> condition = std::nullopt) {
  if (gen.conditional() != condition.has_value()) {
    throw std::invalid_argument(
        gen.conditional()
            ? "sample_generator: conditional generator needs a label"
            : "sample_generator: unconditional generator takes no label");
  }
  const std::size_t d = gen.net.output_width();
  if (n == 0) return Tensor({0, d}, {});
  Tensor noise = rng_standard_normal({n, gen.noise_dim}, rng);
  if (condition) {
    noise = concat_condition(noise, *condition, gen.groups);
  }
  return mlp_forward(gen.net, noise);
}

// Unconditional draw from a conditional generator: per-row labels follow the
// declared training proportions. Plain generators pass straight through.
inline Tensor sample_unconditional(const Generator& gen, std::size_t n,
                                   Rng& rng) {
  if (!gen.conditional()) return sample_generator(gen, n, rng);
  const std::size_t d = gen.net.output_width();
  if (n == 0) return Tensor({0, d}, {});
  const std::vector<int> labels =
      detail::draw_labels(gen.label_proportions, n, rng);
  const Tensor noise = rng_standard_normal({n, gen.noise_dim}, rng);
  Tape tape;
  const Tensor z = tape.leaf(noise, false);
  const Tensor input = append_onehot(z, labels, gen.groups);
  const BoundMlp bound = bind_mlp(tape, gen.net, false);
  return mlp_apply(bound, input).detached();
}

// CSV dump of the per-step diagnostics.
inline void write_history_csv(const std::vector<StepRecord>& history,
                              std::ostream& os) {
  os << "step,d_loss,g_loss,mean_d_fake\n";
  char buf[128];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g", i,
                  history[i].d_loss, history[i].g_loss,
                  history[i].mean_d_fake);
    os << buf << '\n';
  }
}

}  // namespace ganfair
