#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ganfair/tensor.hpp"

namespace ganfair {

// Counter-based generator: the i-th output is a mix of (key, i), so a stream
// is fully determined by its key and draws are identical across platforms.
// split() derives an independent key from (key, stream-id), which is how
// parallel runs get their own streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed + kGamma)) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.seed_ = seed_;
    child.key_ = mix64(key_ ^ mix64(stream * kGamma + 0x63d83595849a8c32ULL));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; consumes exactly two raw draws per call.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("rng: below(0)");
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Categorical draw from proportions (assumed to sum to 1).
  std::size_t categorical(const std::vector<double>& proportions) {
    if (proportions.empty()) {
      throw std::invalid_argument("rng: empty proportions");
    }
    const double u = uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < proportions.size(); ++i) {
      acc += proportions[i];
      if (u < acc) return i;
    }
    return proportions.size() - 1;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline Tensor rng_standard_normal(const Shape& shape, Rng& rng) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("rng_standard_normal: zero dimension in " +
                                  shape_str(shape));
    }
  }
  if (shape.empty()) {
    throw std::invalid_argument("rng_standard_normal: empty shape");
  }
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.normal();
  return Tensor(shape, std::move(values));
}

}  // namespace ganfair
