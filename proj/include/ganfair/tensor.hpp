#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ganfair {

// Raised when an operation produces or receives a non-finite value.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

class Tape;

// Dense row-major tensor. A tensor is either a plain value (tape() == nullptr)
// or bound to a computation graph node on some tape.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
      throw std::invalid_argument("tensor: values count " +
                                  std::to_string(values_.size()) +
                                  " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) {
    std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  bool is_scalar() const { return values_.size() == 1; }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const {
    return shape_.size() < 2 ? (shape_.empty() ? 0 : 1) : shape_[1];
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double value() const {
    if (!is_scalar()) {
      throw std::invalid_argument("tensor: value() on non-scalar " +
                                  shape_str(shape_));
    }
    return values_[0];
  }

  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols() + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols() + c];
  }

  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool bound() const { return tape_ != nullptr; }
  bool requires_grad() const { return requires_grad_; }

  // Value copy without graph binding.
  Tensor detached() const { return Tensor(shape_, values_); }

 private:
  friend class Tape;
  Shape shape_{};
  std::vector<double> values_{};
  Tape* tape_ = nullptr;
  int node_ = -1;
  bool requires_grad_ = false;
};

// Gradients keyed by graph node id. Every requires-grad leaf of the tape gets
// an entry after backward(); leaves the root does not reach hold zeros.
class GradientMap {
 public:
  const Tensor& at(const Tensor& leaf) const {
    auto it = entries_.find(leaf.node());
    if (!leaf.bound() || it == entries_.end()) {
      throw std::invalid_argument("gradient map: no entry for tensor");
    }
    return it->second;
  }

  bool contains(const Tensor& leaf) const {
    return leaf.bound() && entries_.count(leaf.node()) > 0;
  }

  std::size_t size() const { return entries_.size(); }

  void insert(int node, Tensor grad) { entries_.emplace(node, std::move(grad)); }

 private:
  std::unordered_map<int, Tensor> entries_;
};

// Per-iteration computation graph. Nodes are appended in creation order, so
// parents always precede children and reverse id order is a valid reverse
// topological order.
class Tape {
 public:
  using BackwardFn =
      std::function<void(const std::vector<double>& out_grad,
                         std::vector<std::vector<double>>& grads)>;

  Tensor leaf(const Tensor& value, bool requires_grad = false) {
    if (value.empty()) {
      throw std::invalid_argument("tape: leaf tensor must be non-empty");
    }
    check_finite("leaf", value.values());
    Node node;
    node.op = "leaf";
    node.shape = value.shape();
    node.requires_grad = requires_grad;
    node.is_leaf = true;
    nodes_.push_back(std::move(node));
    return bind(value.shape(), value.values(),
                static_cast<int>(nodes_.size()) - 1, requires_grad);
  }

  Tensor constant(double v) { return leaf(Tensor::scalar(v), false); }

  Tensor constant(Shape shape, std::vector<double> values) {
    return leaf(Tensor(std::move(shape), std::move(values)), false);
  }

  // Registers an op node. `parents` are node ids on this tape; the backward
  // callback accumulates into grads[parent] (resized lazily by the caller
  // side helpers below).
  Tensor emplace(const char* op, Shape shape, std::vector<double> values,
                 std::vector<int> parents, BackwardFn backward) {
    check_finite(op, values);
    bool requires = false;
    for (int p : parents) requires = requires || nodes_[p].requires_grad;
    Node node;
    node.op = op;
    node.shape = shape;
    node.parents = std::move(parents);
    node.requires_grad = requires;
    if (requires) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return bind(std::move(shape), std::move(values),
                static_cast<int>(nodes_.size()) - 1, requires);
  }

  std::size_t size() const { return nodes_.size(); }

  // Reverse-topological gradient accumulation from a scalar root.
  GradientMap backward(const Tensor& root) const {
    if (root.tape() != this) {
      throw std::invalid_argument("backward: root not bound to this tape");
    }
    if (!root.is_scalar()) {
      throw std::invalid_argument("backward: root must be scalar, got " +
                                  shape_str(root.shape()));
    }
    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<int> stack = {root.node()};
    reachable[root.node()] = 1;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      for (int p : nodes_[id].parents) {
        if (!reachable[p]) {
          reachable[p] = 1;
          stack.push_back(p);
        }
      }
    }

    std::vector<std::vector<double>> grads(nodes_.size());
    grads[root.node()] = {1.0};
    for (int id = root.node(); id >= 0; --id) {
      const Node& node = nodes_[id];
      if (!reachable[id] || !node.requires_grad) continue;
      if (grads[id].empty() || !node.backward) continue;
      node.backward(grads[id], grads);
    }

    GradientMap map;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      const Node& node = nodes_[id];
      if (!node.is_leaf || !node.requires_grad) continue;
      if (grads[id].empty()) {
        map.insert(static_cast<int>(id), Tensor::zeros(node.shape));
      } else {
        map.insert(static_cast<int>(id), Tensor(node.shape, std::move(grads[id])));
      }
    }
    return map;
  }

  static void check_finite(const char* op, const std::vector<double>& values) {
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw numeric_error(std::string(op) + ": non-finite value produced");
      }
    }
  }

 private:
  struct Node {
    const char* op = "";
    Shape shape;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  Tensor bind(Shape shape, std::vector<double> values, int node,
              bool requires_grad) {
    Tensor t(std::move(shape), std::move(values));
    t.tape_ = this;
    t.node_ = node;
    t.requires_grad_ = requires_grad;
    return t;
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.bound() || !b.bound() || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) +
                                ": operands must be bound to one tape");
  }
  return *a.tape();
}

inline Tape& own_tape(const Tensor& a, const char* op) {
  if (!a.bound()) {
    throw std::invalid_argument(std::string(op) + ": operand not bound to a tape");
  }
  return *a.tape();
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

inline void require_nonempty(const Tensor& a, const char* op) {
  if (a.empty()) {
    throw std::invalid_argument(std::string(op) + ": empty input");
  }
}

// Accumulate fn(i) into dst, which is lazily sized to n zeros.
template <typename Fn>
inline void accumulate(std::vector<double>& dst, std::size_t n, Fn fn) {
  if (dst.empty()) dst.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) dst[i] += fn(i);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix product with recorded backward: gA = g.Bt, gB = At.g
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = detail::same_tape(a, b, "matmul");
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw std::invalid_argument("matmul: operands must be 2-d");
  }
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += av * pb[l * n + j];
      }
    }
  }
  std::vector<double> av = a.values(), bv = b.values();
  const int na = a.node(), nb = b.node();
  return tape.emplace(
      "matmul", {m, n}, std::move(out), {na, nb},
      [m, k, n, na, nb, av = std::move(av), bv = std::move(bv)](
          const std::vector<double>& g, std::vector<std::vector<double>>& grads) {
        auto& ga = grads[na];
        if (ga.empty()) ga.assign(m * k, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double gv = g[i * n + j];
            for (std::size_t l = 0; l < k; ++l) {
              ga[i * k + l] += gv * bv[l * n + j];
            }
          }
        }
        auto& gb = grads[nb];
        if (gb.empty()) gb.assign(k * n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t l = 0; l < k; ++l) {
            const double av_il = av[i * k + l];
            for (std::size_t j = 0; j < n; ++j) {
              gb[l * n + j] += av_il * g[i * n + j];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  Tape& tape = detail::same_tape(a, b, "add");
  detail::require_same_shape(a, b, "add");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] + b.values()[i];
  const int na = a.node(), nb = b.node();
  return tape.emplace(
      "add", a.shape(), std::move(out), {na, nb},
      [n, na, nb](const std::vector<double>& g,
                  std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) { return g[i]; });
        detail::accumulate(grads[nb], n, [&](std::size_t i) { return g[i]; });
      });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& tape = detail::same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] - b.values()[i];
  const int na = a.node(), nb = b.node();
  return tape.emplace(
      "sub", a.shape(), std::move(out), {na, nb},
      [n, na, nb](const std::vector<double>& g,
                  std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) { return g[i]; });
        detail::accumulate(grads[nb], n, [&](std::size_t i) { return -g[i]; });
      });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& tape = detail::same_tape(a, b, "mul");
  detail::require_same_shape(a, b, "mul");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[i] * b.values()[i];
  std::vector<double> av = a.values(), bv = b.values();
  const int na = a.node(), nb = b.node();
  return tape.emplace(
      "mul", a.shape(), std::move(out), {na, nb},
      [n, na, nb, av = std::move(av), bv = std::move(bv)](
          const std::vector<double>& g, std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n,
                           [&](std::size_t i) { return g[i] * bv[i]; });
        detail::accumulate(grads[nb], n,
                           [&](std::size_t i) { return g[i] * av[i]; });
      });
}

inline Tensor neg(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "neg");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = -a.values()[i];
  const int na = a.node();
  return tape.emplace(
      "neg", a.shape(), std::move(out), {na},
      [n, na](const std::vector<double>& g,
              std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) { return -g[i]; });
      });
}

inline Tensor scale(const Tensor& a, double c) {
  Tape& tape = detail::own_tape(a, "scale");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c * a.values()[i];
  const int na = a.node();
  return tape.emplace(
      "scale", a.shape(), std::move(out), {na},
      [n, na, c](const std::vector<double>& g,
                 std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n,
                           [&](std::size_t i) { return c * g[i]; });
      });
}

inline Tensor exp(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "exp");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a.values()[i]);
  const int na = a.node();
  std::vector<double> saved = out;
  return tape.emplace(
      "exp", a.shape(), std::move(out), {na},
      [n, na, saved = std::move(saved)](const std::vector<double>& g,
                                        std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n,
                           [&](std::size_t i) { return g[i] * saved[i]; });
      });
}

inline Tensor log(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "log");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a.values()[i] > 0.0)) {
      throw std::invalid_argument("log: non-positive input");
    }
    out[i] = std::log(a.values()[i]);
  }
  std::vector<double> av = a.values();
  const int na = a.node();
  return tape.emplace(
      "log", a.shape(), std::move(out), {na},
      [n, na, av = std::move(av)](const std::vector<double>& g,
                                  std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n,
                           [&](std::size_t i) { return g[i] / av[i]; });
      });
}

inline Tensor sigmoid(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "sigmoid");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-a.values()[i]));
  }
  const int na = a.node();
  std::vector<double> saved = out;
  return tape.emplace(
      "sigmoid", a.shape(), std::move(out), {na},
      [n, na, saved = std::move(saved)](const std::vector<double>& g,
                                        std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) {
          return g[i] * saved[i] * (1.0 - saved[i]);
        });
      });
}

inline Tensor tanh(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "tanh");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a.values()[i]);
  const int na = a.node();
  std::vector<double> saved = out;
  return tape.emplace(
      "tanh", a.shape(), std::move(out), {na},
      [n, na, saved = std::move(saved)](const std::vector<double>& g,
                                        std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) {
          return g[i] * (1.0 - saved[i] * saved[i]);
        });
      });
}

inline Tensor leaky_relu(const Tensor& a, double alpha = 0.2) {
  Tape& tape = detail::own_tape(a, "leaky_relu");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = a.values()[i];
    out[i] = v >= 0.0 ? v : alpha * v;
  }
  std::vector<double> av = a.values();
  const int na = a.node();
  return tape.emplace(
      "leaky_relu", a.shape(), std::move(out), {na},
      [n, na, alpha, av = std::move(av)](const std::vector<double>& g,
                                         std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) {
          return g[i] * (av[i] >= 0.0 ? 1.0 : alpha);
        });
      });
}

// Gradient passes where lo <= value <= hi and is cut outside.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
  Tape& tape = detail::own_tape(a, "clamp");
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  const std::size_t n = a.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::min(hi, std::max(lo, a.values()[i]));
  }
  std::vector<double> av = a.values();
  const int na = a.node();
  return tape.emplace(
      "clamp", a.shape(), std::move(out), {na},
      [n, na, lo, hi, av = std::move(av)](const std::vector<double>& g,
                                          std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t i) {
          return (av[i] >= lo && av[i] <= hi) ? g[i] : 0.0;
        });
      });
}

// Row-broadcast bias addition: a is [m x n], bias is [n].
inline Tensor add_row(const Tensor& a, const Tensor& bias) {
  Tape& tape = detail::same_tape(a, bias, "add_row");
  if (a.shape().size() != 2 || bias.shape().size() != 1 ||
      bias.size() != a.cols()) {
    throw std::invalid_argument("add_row: need [m x n] plus [n], got " +
                                shape_str(a.shape()) + " and " +
                                shape_str(bias.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = a.values()[i * n + j] + bias.values()[j];
    }
  }
  const int na = a.node(), nb = bias.node();
  return tape.emplace(
      "add_row", a.shape(), std::move(out), {na, nb},
      [m, n, na, nb](const std::vector<double>& g,
                     std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], m * n,
                           [&](std::size_t i) { return g[i]; });
        auto& gb = grads[nb];
        if (gb.empty()) gb.assign(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "sum");
  detail::require_nonempty(a, "sum");
  const std::size_t n = a.size();
  double total = 0.0;
  for (double v : a.values()) total += v;
  const int na = a.node();
  return tape.emplace(
      "sum", {1}, {total}, {na},
      [n, na](const std::vector<double>& g,
              std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t) { return g[0]; });
      });
}

inline Tensor mean(const Tensor& a) {
  Tape& tape = detail::own_tape(a, "mean");
  detail::require_nonempty(a, "mean");
  const std::size_t n = a.size();
  double total = 0.0;
  for (double v : a.values()) total += v;
  const int na = a.node();
  return tape.emplace(
      "mean", {1}, {total / static_cast<double>(n)}, {na},
      [n, na](const std::vector<double>& g,
              std::vector<std::vector<double>>& grads) {
        detail::accumulate(grads[na], n, [&](std::size_t) {
          return g[0] / static_cast<double>(n);
        });
      });
}

// Appends a one-hot block of width k to every row; labels[r] selects the hot
// column of row r. Gradient flows back through the original columns only.
inline Tensor append_onehot(const Tensor& a, const std::vector<int>& labels,
                            std::size_t k) {
  Tape& tape = detail::own_tape(a, "append_onehot");
  if (a.shape().size() != 2) {
    throw std::invalid_argument("append_onehot: input must be 2-d");
  }
  if (labels.size() != a.rows()) {
    throw std::invalid_argument("append_onehot: one label per row required");
  }
  const std::size_t m = a.rows(), d = a.cols();
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::invalid_argument("append_onehot: label " +
                                  std::to_string(label) +
                                  " out of range for k=" + std::to_string(k));
    }
  }
  std::vector<double> out(m * (d + k), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * (d + k) + j] = a.values()[i * d + j];
    }
    out[i * (d + k) + d + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  const int na = a.node();
  return tape.emplace(
      "append_onehot", {m, d + k}, std::move(out), {na},
      [m, d, k, na](const std::vector<double>& g,
                    std::vector<std::vector<double>>& grads) {
        auto& ga = grads[na];
        if (ga.empty()) ga.assign(m * d, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            ga[i * d + j] += g[i * (d + k) + j];
          }
        }
      });
}

}  // namespace ganfair
