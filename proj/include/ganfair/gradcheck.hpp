#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ganfair/tensor.hpp"

namespace ganfair {

// Scalar function of a parameter set: builds a graph on the given tape from
// leaves bound to the current parameter values and returns the scalar root.
using ScalarFn =
    std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Compares reverse-mode gradients against central differences and returns
// max over coordinates of |analytic - numeric| / max(1, |analytic|).
inline double grad_check(const ScalarFn& f, std::vector<Tensor> point,
                         double eps = 1e-5) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");

  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(at.size());
    for (const Tensor& p : at) leaves.push_back(tape.leaf(p, false));
    const Tensor root = f(tape, leaves);
    if (!root.is_scalar()) {
      throw std::invalid_argument("grad_check: f must return a scalar");
    }
    const double v = root.value();
    if (!std::isfinite(v)) {
      throw numeric_error("grad_check: non-finite evaluation");
    }
    return v;
  };

  // Analytic pass.
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(point.size());
  for (const Tensor& p : point) leaves.push_back(tape.leaf(p, true));
  const Tensor root = f(tape, leaves);
  if (!root.is_scalar()) {
    throw std::invalid_argument("grad_check: f must return a scalar");
  }
  if (!std::isfinite(root.value())) {
    throw numeric_error("grad_check: non-finite evaluation");
  }
  const GradientMap grads = tape.backward(root);

  double worst = 0.0;
  for (std::size_t p = 0; p < point.size(); ++p) {
    const Tensor& analytic = grads.at(leaves[p]);
    for (std::size_t j = 0; j < point[p].size(); ++j) {
      const double saved = point[p].values()[j];
      point[p].values()[j] = saved + eps;
      const double up = evaluate(point);
      point[p].values()[j] = saved - eps;
      const double down = evaluate(point);
      point[p].values()[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.values()[j];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ganfair
