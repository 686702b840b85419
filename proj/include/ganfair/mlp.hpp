#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/random.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

enum class Activation { Identity, Sigmoid, Tanh, LeakyRelu };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::LeakyRelu: return "leaky_relu";
  }
  throw std::invalid_argument("activation_name: unknown kind");
}

inline Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  throw std::invalid_argument("parse_activation: unknown kind '" + name + "'");
}

constexpr double kLeakyReluAlpha = 0.2;

inline Tensor apply_activation(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
    case Activation::LeakyRelu: return leaky_relu(x, kLeakyReluAlpha);
  }
  throw std::invalid_argument("apply_activation: unknown kind");
}

// Fully connected network: weights[i] is [sizes[i] x sizes[i+1]], biases[i]
// is [sizes[i+1]]. Hidden activation applies to all but the last layer.
struct MlpNetwork {
  std::vector<std::size_t> layer_sizes;
  Activation hidden = Activation::Tanh;
  Activation output = Activation::Identity;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t input_width() const { return layer_sizes.front(); }
  std::size_t output_width() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
      n += layer_sizes[i] * layer_sizes[i + 1] + layer_sizes[i + 1];
    }
    return n;
  }
};

// Glorot-uniform weights, zero biases.
inline MlpNetwork mlp_init(std::vector<std::size_t> layer_sizes,
                           Activation hidden, Activation output, Rng& rng) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("mlp_init: need at least 2 layer sizes");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("mlp_init: zero layer size");
  }
  MlpNetwork net;
  net.layer_sizes = std::move(layer_sizes);
  net.hidden = hidden;
  net.output = output;
  for (std::size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
    const std::size_t fan_in = net.layer_sizes[i];
    const std::size_t fan_out = net.layer_sizes[i + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-s, s);
    net.weights.emplace_back(Shape{fan_in, fan_out}, std::move(w));
    net.biases.emplace_back(Shape{fan_out},
                            std::vector<double>(fan_out, 0.0));
  }
  return net;
}

// Network parameters bound to a tape as leaves, in W0, b0, W1, b1, ... order.
struct BoundMlp {
  const MlpNetwork* net = nullptr;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::vector<const Tensor*> leaves() const {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }
};

inline BoundMlp bind_mlp(Tape& tape, const MlpNetwork& net,
                         bool requires_grad) {
  BoundMlp bound;
  bound.net = &net;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    bound.weights.push_back(tape.leaf(net.weights[i], requires_grad));
    bound.biases.push_back(tape.leaf(net.biases[i], requires_grad));
  }
  return bound;
}

inline Tensor mlp_apply(const BoundMlp& bound, const Tensor& input) {
  const MlpNetwork& net = *bound.net;
  if (input.shape().size() != 2 || input.cols() != net.input_width()) {
    throw std::invalid_argument(
        "mlp_forward: input width " + std::to_string(input.cols()) +
        " does not match first layer size " +
        std::to_string(net.input_width()));
  }
  Tensor h = input;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    h = add_row(matmul(h, bound.weights[i]), bound.biases[i]);
    const bool last = (i + 1 == net.layer_count());
    h = apply_activation(h, last ? net.output : net.hidden);
  }
  return h;
}

// Value-level forward on a throwaway graph; parameters are untouched.
inline Tensor mlp_forward(const MlpNetwork& net, const Tensor& input) {
  Tape tape;
  const BoundMlp bound = bind_mlp(tape, net, false);
  const Tensor x = tape.leaf(input, false);
  return mlp_apply(bound, x).detached();
}

// Appends a one-hot group encoding to every row. Works both on plain value
// tensors and on graph-bound tensors (gradients flow through the data block).
inline Tensor concat_condition(const Tensor& input, int label, std::size_t k) {
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    throw std::invalid_argument("concat_condition: label " +
                                std::to_string(label) +
                                " out of range for k=" + std::to_string(k));
  }
  if (input.shape().size() != 2) {
    throw std::invalid_argument("concat_condition: input must be 2-d");
  }
  if (input.bound()) {
    return append_onehot(input, std::vector<int>(input.rows(), label), k);
  }
  const std::size_t m = input.rows(), d = input.cols();
  std::vector<double> out(m * (d + k), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * (d + k) + j] = input.values()[i * d + j];
    }
    out[i * (d + k) + d + static_cast<std::size_t>(label)] = 1.0;
  }
  return Tensor({m, d + k}, std::move(out));
}

// ---------------------------------------------------------------------------
// Checkpoint format: line 1 "mlp <layer sizes>", line 2 "<hidden> <output>",
// then one parameter matrix row per line (weight rows, then the bias row,
// per layer), printed with 17 significant digits for exact round-trips.
// ---------------------------------------------------------------------------

inline void save_mlp(const MlpNetwork& net, std::ostream& os) {
  os << "mlp";
  for (std::size_t s : net.layer_sizes) os << ' ' << s;
  os << '\n';
  os << activation_name(net.hidden) << ' ' << activation_name(net.output)
     << '\n';
  char buf[64];
  auto write_row = [&](const double* row, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      if (j) os << ' ';
      os << buf;
    }
    os << '\n';
  };
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    const Tensor& w = net.weights[i];
    for (std::size_t r = 0; r < w.rows(); ++r) {
      write_row(w.values().data() + r * w.cols(), w.cols());
    }
    write_row(net.biases[i].values().data(), net.biases[i].size());
  }
}

inline void save_mlp(const MlpNetwork& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_mlp: cannot write " + path);
  save_mlp(net, os);
  if (!os) throw std::runtime_error("save_mlp: write failed for " + path);
}

inline MlpNetwork load_mlp(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("load_mlp: missing header line");
  }
  std::istringstream head(line);
  std::string tag;
  head >> tag;
  if (tag != "mlp") {
    throw std::runtime_error("load_mlp: bad header '" + line + "'");
  }
  MlpNetwork net;
  std::size_t s;
  while (head >> s) net.layer_sizes.push_back(s);
  if (net.layer_sizes.size() < 2) {
    throw std::runtime_error("load_mlp: need at least 2 layer sizes");
  }
  if (!std::getline(is, line)) {
    throw std::runtime_error("load_mlp: missing activation line");
  }
  std::istringstream acts(line);
  std::string hidden_name, output_name;
  acts >> hidden_name >> output_name;
  net.hidden = parse_activation(hidden_name);
  net.output = parse_activation(output_name);

  auto read_row = [&](std::size_t n) {
    if (!std::getline(is, line)) {
      throw std::runtime_error("load_mlp: unexpected end of file");
    }
    std::istringstream row(line);
    std::vector<double> values(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (!(row >> values[j])) {
        throw std::runtime_error("load_mlp: malformed parameter row");
      }
    }
    return values;
  };

  for (std::size_t i = 0; i + 1 < net.layer_sizes.size(); ++i) {
    const std::size_t fan_in = net.layer_sizes[i];
    const std::size_t fan_out = net.layer_sizes[i + 1];
    std::vector<double> w;
    w.reserve(fan_in * fan_out);
    for (std::size_t r = 0; r < fan_in; ++r) {
      const auto row = read_row(fan_out);
      w.insert(w.end(), row.begin(), row.end());
    }
    net.weights.emplace_back(Shape{fan_in, fan_out}, std::move(w));
    net.biases.emplace_back(Shape{fan_out}, read_row(fan_out));
  }
  return net;
}

inline MlpNetwork load_mlp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_mlp: cannot read " + path);
  return load_mlp(is);
}

}  // namespace ganfair
