#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/random.hpp"
#include "ganfair/tensor.hpp"

namespace ganfair {

constexpr double kPatchMargin = 0.1;

// Exact allocation of n items to proportions; leftovers go to the largest
// fractional remainders, ties to the lowest group id.
inline std::vector<std::size_t> largest_remainder_counts(
    const std::vector<double>& proportions, std::size_t n) {
  double total = 0.0;
  for (double p : proportions) {
    if (p < 0.0) {
      throw std::invalid_argument("proportions: negative entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("proportions: must sum to 1, got " +
                                std::to_string(total));
  }
  std::vector<std::size_t> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) {
    counts[remainders[j % remainders.size()].second] += 1;
  }
  return counts;
}

// Samples with group labels and declared proportions, plus the descriptors
// the matching assigner needs (mixture centers or patch prototypes).
struct GroupedDataset {
  Tensor samples;                   // n x d
  std::vector<int> labels;          // n, in [0, k)
  std::vector<double> proportions;  // k, sums to 1
  std::vector<std::vector<double>> centers;     // mixture components
  std::vector<double> sigmas;                   // per component
  std::vector<std::vector<double>> prototypes;  // patch case
  double patch_noise_sigma = 0.0;

  std::size_t size() const { return samples.rows(); }
  std::size_t dim() const { return samples.cols(); }
  std::size_t groups() const { return proportions.size(); }
};

inline GroupedDataset make_gaussian_mixture(
    const std::vector<std::vector<double>>& centers,
    const std::vector<double>& sigmas, const std::vector<double>& proportions,
    std::size_t n, Rng& rng) {
  const std::size_t k = centers.size();
  if (k < 2) throw std::invalid_argument("make_gaussian_mixture: need k >= 2");
  if (sigmas.size() != k || proportions.size() != k) {
    throw std::invalid_argument(
        "make_gaussian_mixture: centers/sigmas/proportions count mismatch");
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("make_gaussian_mixture: sigma must be > 0");
    }
  }
  if (n < k) throw std::invalid_argument("make_gaussian_mixture: n < k");
  const std::size_t d = centers.front().size();
  for (const auto& c : centers) {
    if (c.size() != d) {
      throw std::invalid_argument("make_gaussian_mixture: ragged centers");
    }
  }
  const auto counts = largest_remainder_counts(proportions, n);
  GroupedDataset data;
  data.proportions = proportions;
  data.centers = centers;
  data.sigmas = sigmas;
  std::vector<double> values;
  values.reserve(n * d);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t i = 0; i < counts[g]; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        values.push_back(centers[g][j] + sigmas[g] * rng.normal());
      }
      data.labels.push_back(static_cast<int>(g));
    }
  }
  data.samples = Tensor({n, d}, std::move(values));
  return data;
}

// Two-group patch set: group 0 is prototype + noise clamped to [0,1], group 1
// is the pixelwise inversion of such a sample. Prototype means must stay
// below 0.5 - margin so the mean-threshold assigner separates the groups.
inline GroupedDataset make_inverted_patches(
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<double>& proportions, std::size_t n, double noise_sigma,
    Rng& rng, double margin = kPatchMargin) {
  if (prototypes.empty()) {
    throw std::invalid_argument("make_inverted_patches: no prototypes");
  }
  if (proportions.size() != 2) {
    throw std::invalid_argument(
        "make_inverted_patches: proportions must cover {base, inverted}");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("make_inverted_patches: bad noise sigma");
  }
  const std::size_t d = prototypes.front().size();
  for (const auto& proto : prototypes) {
    if (proto.size() != d) {
      throw std::invalid_argument("make_inverted_patches: ragged prototypes");
    }
    double mean = 0.0;
    for (double v : proto) mean += v;
    mean /= static_cast<double>(d);
    if (mean > 0.5 - margin) {
      throw std::invalid_argument(
          "make_inverted_patches: prototype mean " + std::to_string(mean) +
          " violates margin " + std::to_string(margin));
    }
  }
  const auto counts = largest_remainder_counts(proportions, n);
  GroupedDataset data;
  data.proportions = proportions;
  data.prototypes = prototypes;
  data.patch_noise_sigma = noise_sigma;

  auto base_sample = [&](std::vector<double>& row) {
    const auto& proto = prototypes[rng.below(prototypes.size())];
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = std::min(1.0, std::max(0.0, proto[j] + noise_sigma * rng.normal()));
    }
  };

  std::vector<double> values;
  values.reserve(n * d);
  std::vector<double> row(d);
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < counts[g]; ++i) {
      base_sample(row);
      for (std::size_t j = 0; j < d; ++j) {
        values.push_back(g == 0 ? row[j] : 1.0 - row[j]);
      }
      data.labels.push_back(static_cast<int>(g));
    }
  }
  data.samples = Tensor({n, d}, std::move(values));
  return data;
}

// Group 1 ("white") iff the sample mean exceeds tau, group 0 otherwise.
inline int assign_group_mean_threshold(std::span<const double> sample,
                                       double tau = 0.5) {
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(sample.size());
  return mean > tau ? 1 : 0;
}

inline int assign_group_nearest_center(
    std::span<const double> sample,
    const std::vector<std::vector<double>>& centers) {
  if (centers.empty()) {
    throw std::invalid_argument("assign_group_nearest_center: no centers");
  }
  int best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < centers.size(); ++g) {
    double sq = 0.0;
    for (std::size_t j = 0; j < sample.size(); ++j) {
      const double delta = sample[j] - centers[g][j];
      sq += delta * delta;
    }
    if (sq < best_sq) {
      best_sq = sq;
      best = static_cast<int>(g);
    }
  }
  return best;
}

struct GroupAssigner {
  enum class Kind { MeanThreshold, NearestCenter };

  Kind kind = Kind::MeanThreshold;
  double tau = 0.5;
  std::vector<std::vector<double>> centers;

  static GroupAssigner mean_threshold(double tau = 0.5) {
    GroupAssigner a;
    a.kind = Kind::MeanThreshold;
    a.tau = tau;
    return a;
  }

  static GroupAssigner nearest_center(std::vector<std::vector<double>> centers) {
    if (centers.empty()) {
      throw std::invalid_argument("nearest_center: no centers");
    }
    GroupAssigner a;
    a.kind = Kind::NearestCenter;
    a.centers = std::move(centers);
    return a;
  }

  std::size_t group_count() const {
    return kind == Kind::MeanThreshold ? 2 : centers.size();
  }

  int assign(std::span<const double> sample) const {
    return kind == Kind::MeanThreshold
               ? assign_group_mean_threshold(sample, tau)
               : assign_group_nearest_center(sample, centers);
  }

  std::vector<int> assign_all(const Tensor& samples) const {
    std::vector<int> out(samples.rows());
    const std::size_t d = samples.cols();
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      out[i] = assign(std::span<const double>(samples.values().data() + i * d, d));
    }
    return out;
  }

  std::string describe() const {
    if (kind == Kind::MeanThreshold) {
      std::ostringstream os;
      os << "mean_threshold(" << tau << ")";
      return os.str();
    }
    return "nearest_center(" + std::to_string(centers.size()) + ")";
  }
};

struct Batch {
  Tensor samples;
  std::vector<int> labels;
};

// I.i.d. draws with replacement.
inline Batch minibatch(const GroupedDataset& data, std::size_t batch_size,
                       Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("minibatch: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("minibatch: batch size 0");
  const std::size_t d = data.dim();
  Batch batch;
  std::vector<double> values;
  values.reserve(batch_size * d);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t idx = rng.below(data.size());
    const double* row = data.samples.values().data() + idx * d;
    values.insert(values.end(), row, row + d);
    batch.labels.push_back(data.labels[idx]);
  }
  batch.samples = Tensor({batch_size, d}, std::move(values));
  return batch;
}

// ---------------------------------------------------------------------------
// Default benchmarks
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> two_mode_centers() {
  return {{-3.0, 0.0}, {3.0, 0.0}};
}

inline GroupedDataset make_two_mode_mixture(const std::vector<double>& proportions,
                                            std::size_t n, Rng& rng,
                                            double sigma = 0.5) {
  return make_gaussian_mixture(two_mode_centers(), {sigma, sigma}, proportions,
                               n, rng);
}

inline std::vector<std::vector<double>> ring_centers(std::size_t k = 8,
                                                     double radius = 3.0) {
  std::vector<std::vector<double>> centers;
  for (std::size_t g = 0; g < k; ++g) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(g) /
                         static_cast<double>(k);
    centers.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  return centers;
}

inline GroupedDataset make_ring_mixture(std::size_t k, std::size_t n, Rng& rng,
                                        double radius = 3.0,
                                        double sigma = 0.3) {
  return make_gaussian_mixture(
      ring_centers(k, radius), std::vector<double>(k, sigma),
      std::vector<double>(k, 1.0 / static_cast<double>(k)), n, rng);
}

// Four 8x8 glyph prototypes with means around 0.25.
inline std::vector<std::vector<double>> default_patch_prototypes() {
  const std::array<const char*, 4> glyphs = {
      // ring
      "........"
      "..####.."
      ".#....#."
      ".#....#."
      ".#....#."
      ".#....#."
      "..####.."
      "........",
      // bar
      "...##..."
      "..###..."
      "...##..."
      "...##..."
      "...##..."
      "...##..."
      "..####.."
      "........",
      // seven
      ".######."
      ".....##."
      "....##.."
      "...##..."
      "..##...."
      "..##...."
      "..##...."
      "........",
      // corner
      ".##....."
      ".##....."
      ".##....."
      ".##....."
      ".##....."
      ".##....."
      ".######."
      "........"};
  std::vector<std::vector<double>> prototypes;
  for (const char* glyph : glyphs) {
    std::vector<double> proto(64);
    for (std::size_t i = 0; i < 64; ++i) proto[i] = glyph[i] == '#' ? 1.0 : 0.0;
    prototypes.push_back(std::move(proto));
  }
  return prototypes;
}

// ---------------------------------------------------------------------------
// Dataset CSV: sample_idx,group_id,dim_0..dim_{d-1}
// ---------------------------------------------------------------------------

inline void write_samples_csv(const Tensor& samples,
                              const std::vector<int>& labels,
                              std::ostream& os) {
  if (labels.size() != samples.rows()) {
    throw std::invalid_argument("write_samples_csv: one label per row");
  }
  const std::size_t d = samples.cols();
  os << "sample_idx,group_id";
  for (std::size_t j = 0; j < d; ++j) os << ",dim_" << j;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    os << i << ',' << labels[i];
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", samples(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

inline void write_samples_csv(const Tensor& samples,
                              const std::vector<int>& labels,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_samples_csv: cannot write " + path);
  write_samples_csv(samples, labels, os);
  if (!os) throw std::runtime_error("write_samples_csv: write failed " + path);
}

struct LabeledSamples {
  Tensor samples;
  std::vector<int> labels;
};

inline LabeledSamples read_samples_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("sample_idx,group_id", 0) != 0) {
    throw std::runtime_error("read_samples_csv: missing header");
  }
  std::size_t d = 0;
  for (char c : line) d += (c == ',');
  d -= 1;  // sample_idx,group_id take the first two columns
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // sample_idx, ignored
    std::getline(ls, cell, ',');
    labels.push_back(std::stoi(cell));
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::getline(ls, cell, ',')) {
        throw std::runtime_error("read_samples_csv: short row");
      }
      values.push_back(std::stod(cell));
    }
    ++rows;
  }
  return {Tensor({rows, d}, std::move(values)), std::move(labels)};
}

inline LabeledSamples read_samples_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_samples_csv: cannot read " + path);
  return read_samples_csv(is);
}

}  // namespace ganfair
