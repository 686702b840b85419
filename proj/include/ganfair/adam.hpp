#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ganfair/tensor.hpp"

namespace ganfair {

// Bias-corrected Adam over an ordered parameter list. Moments are lazily
// allocated on the first step and stay aligned with the parameter shapes.
struct AdamState {
  double lr;
  double beta1;
  double beta2;
  double eps;
  long long t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  AdamState(double lr_, double beta1_ = 0.9, double beta2_ = 0.999,
            double eps_ = 1e-8)
      : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
  }
};

inline void adam_step(const std::vector<Tensor*>& params,
                      const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: params/grads count mismatch");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->size(), 0.0);
      state.v[i].assign(params[i]->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state tracks a different list");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape() || state.m[i].size() != p.size()) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " +
                                  std::to_string(i));
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.values()[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.values()[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    Tape::check_finite("adam_step", p.values());
  }
}

}  // namespace ganfair
