#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ganfair/tensor.hpp"

namespace ganfair {

// 2-d scatter of samples colored by group, with a legend carrying the group
// rates. Higher-dimensional inputs are projected onto their first two dims.
inline void emit_scatter_svg(const Tensor& samples,
                             const std::vector<int>& labels,
                             std::ostream& os) {
  if (labels.size() != samples.rows()) {
    throw std::invalid_argument("emit_scatter_svg: one label per sample");
  }
  static const std::array<const char*, 8> palette = {
      "#4c72b0", "#dd8452", "#55a868", "#c44e52",
      "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  int k = 0;
  for (int label : labels) k = std::max(k, label + 1);

  double lo_x = -1.0, hi_x = 1.0, lo_y = -1.0, hi_y = 1.0;
  if (n > 0) {
    lo_x = hi_x = samples(0, 0);
    lo_y = hi_y = d > 1 ? samples(0, 1) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = samples(i, 0);
      const double y = d > 1 ? samples(i, 1) : 0.0;
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    }
  }
  const double pad_x = std::max(0.5, 0.05 * (hi_x - lo_x));
  const double pad_y = std::max(0.5, 0.05 * (hi_y - lo_y));
  lo_x -= pad_x;
  hi_x += pad_x;
  lo_y -= pad_y;
  hi_y += pad_y;

  const int width = 640, height = 640;
  auto px = [&](double x) {
    return (x - lo_x) / (hi_x - lo_x) * (width - 40) + 20;
  };
  auto py = [&](double y) {
    return height - ((y - lo_y) / (hi_y - lo_y) * (height - 40) + 20);
  };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"#ffffff\" stroke=\"#cccccc\"/>\n";
  char buf[160];
  for (std::size_t i = 0; i < n; ++i) {
    const double x = samples(i, 0);
    const double y = d > 1 ? samples(i, 1) : 0.0;
    const char* color =
        palette[static_cast<std::size_t>(labels[i]) % palette.size()];
    std::snprintf(buf, sizeof(buf),
                  "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\" "
                  "fill-opacity=\"0.7\"/>\n",
                  px(x), py(y), color);
    os << buf;
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(k, 1)), 0);
  for (int label : labels) counts[static_cast<std::size_t>(label)] += 1;
  os << "  <g font-family=\"sans-serif\" font-size=\"13\">\n";
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const double rate =
        n == 0 ? 0.0 : static_cast<double>(counts[g]) / static_cast<double>(n);
    const double y = 22.0 + 18.0 * static_cast<double>(g);
    std::snprintf(buf, sizeof(buf),
                  "    <rect x=\"26\" y=\"%.1f\" width=\"12\" height=\"12\" "
                  "fill=\"%s\"/>\n",
                  y - 10.0, palette[g % palette.size()]);
    os << buf;
    std::snprintf(buf, sizeof(buf),
                  "    <text x=\"44\" y=\"%.1f\">group %zu: %.3f</text>\n", y,
                  g, rate);
    os << buf;
  }
  os << "  </g>\n";
  os << "</svg>\n";
}

inline void emit_scatter_svg(const Tensor& samples,
                             const std::vector<int>& labels,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit_scatter_svg: cannot write " + path);
  emit_scatter_svg(samples, labels, os);
  if (!os) throw std::runtime_error("emit_scatter_svg: write failed " + path);
}

}  // namespace ganfair
