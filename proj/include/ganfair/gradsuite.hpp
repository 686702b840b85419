#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganfair/ensemble.hpp"
#include "ganfair/gan.hpp"
#include "ganfair/gradcheck.hpp"
#include "ganfair/mlp.hpp"
#include "ganfair/random.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;
};

// Max relative error over `points` random parameter draws for every
// differentiable op and both composite adversarial losses (the discriminator
// and generator value-function terms, and the generator loss with the
// distance regularizer added).
inline std::vector<GradCheckResult> run_gradient_suite(std::size_t points,
                                                       std::uint64_t seed) {
  Rng rng(seed);

  auto random_tensor = [&](Shape shape, double lo, double hi) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(values));
  };
  // Keeps coordinates away from the kink at 0 so central differences hold.
  auto random_signed_off_zero = [&](Shape shape) {
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
      const double mag = rng.uniform(0.1, 1.5);
      v = rng.uniform01() < 0.5 ? -mag : mag;
    }
    return Tensor(std::move(shape), std::move(values));
  };

  std::vector<GradCheckResult> results;
  auto run_case = [&](const std::string& name, auto make_point,
                      const ScalarFn& f) {
    GradCheckResult r{name, 0.0};
    for (std::size_t i = 0; i < points; ++i) {
      r.max_error = std::max(r.max_error, grad_check(f, make_point()));
    }
    results.push_back(r);
  };

  const Shape mat{3, 4};

  run_case(
      "matmul",
      [&] {
        return std::vector<Tensor>{random_tensor({3, 4}, -1, 1),
                                   random_tensor({4, 2}, -1, 1)};
      },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(matmul(p[0], p[1]));
      });
  run_case(
      "add",
      [&] {
        return std::vector<Tensor>{random_tensor(mat, -1, 1),
                                   random_tensor(mat, -1, 1)};
      },
      [](Tape&, const std::vector<Tensor>& p) { return sum(add(p[0], p[1])); });
  run_case(
      "sub",
      [&] {
        return std::vector<Tensor>{random_tensor(mat, -1, 1),
                                   random_tensor(mat, -1, 1)};
      },
      [](Tape&, const std::vector<Tensor>& p) { return sum(sub(p[0], p[1])); });
  run_case(
      "mul",
      [&] {
        return std::vector<Tensor>{random_tensor(mat, -1, 1),
                                   random_tensor(mat, -1, 1)};
      },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(mul(p[0], p[1]));
      });
  run_case(
      "neg", [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) { return sum(neg(p[0])); });
  run_case(
      "scale", [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) {
        return sum(scale(p[0], 1.7));
      });
  run_case(
      "exp", [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) { return mean(exp(p[0])); });
  run_case(
      "log", [&] { return std::vector<Tensor>{random_tensor(mat, 0.2, 3.0)}; },
      [](Tape&, const std::vector<Tensor>& p) { return mean(log(p[0])); });
  run_case(
      "sigmoid",
      [&] { return std::vector<Tensor>{random_tensor(mat, -3, 3)}; },
      [](Tape&, const std::vector<Tensor>& p) { return mean(sigmoid(p[0])); });
  run_case(
      "tanh", [&] { return std::vector<Tensor>{random_tensor(mat, -3, 3)}; },
      [](Tape&, const std::vector<Tensor>& p) { return mean(tanh(p[0])); });
  run_case(
      "leaky_relu",
      [&] { return std::vector<Tensor>{random_signed_off_zero(mat)}; },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(leaky_relu(p[0], 0.2));
      });
  run_case(
      "clamp",
      [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(clamp(p[0], -2.0, 2.0));
      });
  run_case(
      "add_row",
      [&] {
        return std::vector<Tensor>{random_tensor({3, 4}, -1, 1),
                                   random_tensor({4}, -1, 1)};
      },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(add_row(p[0], p[1]));
      });
  run_case(
      "sum", [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) { return sum(p[0]); });
  run_case(
      "mean", [&] { return std::vector<Tensor>{random_tensor(mat, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) { return mean(p[0]); });
  run_case(
      "append_onehot",
      [&] { return std::vector<Tensor>{random_tensor({3, 2}, -1, 1)}; },
      [](Tape&, const std::vector<Tensor>& p) {
        return mean(append_onehot(p[0], {0, 1, 0}, 2));
      });
  {
    const Tensor memory = random_tensor({6, 2}, -2, 2);
    run_case(
        "theta",
        [&] { return std::vector<Tensor>{random_tensor({4, 2}, -2, 2)}; },
        [memory](Tape&, const std::vector<Tensor>& p) {
          return theta_penalty(p[0], memory, 0.5, 1e-6);
        });
  }

  // Composite losses over full network parameter sets.
  const std::size_t data_dim = 2, noise_dim = 2, batch = 6;
  auto net_point = [&](const std::vector<std::size_t>& sizes) {
    std::vector<Tensor> point;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      point.push_back(random_tensor({sizes[i], sizes[i + 1]}, -0.7, 0.7));
      point.push_back(random_tensor({sizes[i + 1]}, -0.2, 0.2));
    }
    return point;
  };
  auto apply_net = [](Tape& tape, const std::vector<Tensor>& params,
                      const Tensor& input, Activation hidden,
                      Activation output) {
    Tensor h = input;
    const std::size_t layers = params.size() / 2;
    for (std::size_t i = 0; i < layers; ++i) {
      h = add_row(matmul(h, params[2 * i]), params[2 * i + 1]);
      h = apply_activation(h, i + 1 == layers ? output : hidden);
    }
    return h;
  };
  const std::vector<std::size_t> d_sizes = {data_dim, 8, 1};
  const std::vector<std::size_t> g_sizes = {noise_dim, 8, data_dim};

  {
    const Tensor real = random_tensor({batch, data_dim}, -2, 2);
    const Tensor fake = random_tensor({batch, data_dim}, -2, 2);
    run_case(
        "loss_discriminator", [&] { return net_point(d_sizes); },
        [&, real, fake](Tape& tape, const std::vector<Tensor>& p) {
          const Tensor d_real =
              apply_net(tape, p, tape.leaf(real), Activation::LeakyRelu,
                        Activation::Sigmoid);
          const Tensor d_fake =
              apply_net(tape, p, tape.leaf(fake), Activation::LeakyRelu,
                        Activation::Sigmoid);
          return gan_loss_discriminator(d_real, d_fake);
        });
  }
  {
    const Tensor noise = random_tensor({batch, noise_dim}, -2, 2);
    const std::vector<Tensor> d_params = net_point(d_sizes);
    auto gen_loss_case = [&](const std::string& name, GenLossMode mode) {
      run_case(
          name, [&] { return net_point(g_sizes); },
          [&, noise, d_params, mode](Tape& tape, const std::vector<Tensor>& p) {
            const Tensor fakes = apply_net(tape, p, tape.leaf(noise),
                                           Activation::Tanh,
                                           Activation::Identity);
            std::vector<Tensor> d_bound;
            for (const Tensor& dp : d_params) d_bound.push_back(tape.leaf(dp));
            const Tensor d_fake = apply_net(tape, d_bound, fakes,
                                            Activation::LeakyRelu,
                                            Activation::Sigmoid);
            return gan_loss_generator(d_fake, mode);
          });
    };
    gen_loss_case("loss_generator_non_saturating", GenLossMode::NonSaturating);
    gen_loss_case("loss_generator_literal", GenLossMode::LiteralSaturating);

    const Tensor memory = random_tensor({8, data_dim}, -2, 2);
    EnsembleMemory mem;
    mem.sets.push_back(memory);
    run_case(
        "loss_generator_regularized", [&] { return net_point(g_sizes); },
        [&, noise, d_params, mem](Tape& tape, const std::vector<Tensor>& p) {
          const Tensor fakes = apply_net(tape, p, tape.leaf(noise),
                                         Activation::Tanh,
                                         Activation::Identity);
          std::vector<Tensor> d_bound;
          for (const Tensor& dp : d_params) d_bound.push_back(tape.leaf(dp));
          const Tensor d_fake = apply_net(tape, d_bound, fakes,
                                          Activation::LeakyRelu,
                                          Activation::Sigmoid);
          return regularized_generator_loss(d_fake, fakes, mem, 0.5,
                                            GenLossMode::NonSaturating);
        });
  }

  return results;
}

}  // namespace ganfair
