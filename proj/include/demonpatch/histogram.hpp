#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "demonpatch/image.hpp"

namespace demonpatch {

inline constexpr int kHistogramBins = 256;

using Histogram = std::array<std::uint64_t, kHistogramBins>;

inline int quantize_level(double v) {
  return static_cast<int>(std::lround(clamp01(v) * (kHistogramBins - 1)));
}

inline double level_value(int level) {
  return static_cast<double>(level) / (kHistogramBins - 1);
}

inline Histogram histogram(const Plane& img) {
  Histogram h{};
  for (double v : img.pixels()) ++h[static_cast<std::size_t>(quantize_level(v))];
  return h;
}

inline Histogram cumulative(const Histogram& h) {
  Histogram c{};
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < h.size(); ++i) c[i] = (acc += h[i]);
  return c;
}

// Classic CDF remap: the lowest occupied level goes to 0, the highest to 1.
// A single-level image is returned unchanged.
inline Plane histogram_equalize(const Plane& img) {
  if (img.empty()) return img;
  const Histogram cdf = cumulative(histogram(img));
  const std::uint64_t n = cdf.back();
  std::uint64_t cdf_min = 0;
  for (std::uint64_t c : cdf)
    if (c > 0) {
      cdf_min = c;
      break;
    }
  if (cdf_min == n) return img;

  std::array<double, kHistogramBins> lut{};
  for (std::size_t b = 0; b < lut.size(); ++b) {
    const double t = cdf[b] <= cdf_min
                         ? 0.0
                         : static_cast<double>(cdf[b] - cdf_min) / static_cast<double>(n - cdf_min);
    lut[b] = clamp01(t);
  }
  Plane out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i)
    out.pixels()[i] = lut[static_cast<std::size_t>(quantize_level(img.pixels()[i]))];
  return out;
}

// Maps src onto ref's distribution. Each source level is represented by the
// midpoint of its CDF step, which sends a constant source to ref's median.
inline Plane histogram_match(const Plane& src, const Plane& ref) {
  if (src.empty()) return src;
  if (ref.empty()) throw DimensionError("histogram_match: empty reference");
  const Histogram src_h = histogram(src);
  const Histogram src_cdf = cumulative(src_h);
  const Histogram ref_cdf = cumulative(histogram(ref));
  const double n_src = static_cast<double>(src_cdf.back());
  const double n_ref = static_cast<double>(ref_cdf.back());

  std::array<double, kHistogramBins> lut{};
  int r = 0;
  for (int b = 0; b < kHistogramBins; ++b) {
    const double below = b == 0 ? 0.0 : static_cast<double>(src_cdf[static_cast<std::size_t>(b - 1)]);
    const double mid = 0.5 * (below + static_cast<double>(src_cdf[static_cast<std::size_t>(b)])) / n_src;
    // mid is non-decreasing in b, so the search resumes where it stopped.
    while (r < kHistogramBins - 1 &&
           static_cast<double>(ref_cdf[static_cast<std::size_t>(r)]) / n_ref < mid)
      ++r;
    lut[static_cast<std::size_t>(b)] = level_value(r);
  }
  Plane out(src.width(), src.height());
  for (std::size_t i = 0; i < src.size(); ++i)
    out.pixels()[i] = lut[static_cast<std::size_t>(quantize_level(src.pixels()[i]))];
  return out;
}

}  // namespace demonpatch
