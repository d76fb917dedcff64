#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "demonpatch/image.hpp"
#include "demonpatch/parallel.hpp"

namespace demonpatch {

struct GradientPair {
  Plane dx;
  Plane dy;
};

namespace detail {

// Row-parallel loop for planes large enough to amortize thread start-up.
template <class Fn>
void for_rows(int height, int width, Fn&& fn) {
  if (static_cast<long>(height) * width >= 65536) {
    parallel::for_each_index(0, static_cast<std::size_t>(height),
                             [&](std::size_t y) { fn(static_cast<int>(y)); });
  } else {
    for (int y = 0; y < height; ++y) fn(y);
  }
}

}  // namespace detail

// Central differences in the interior, one-sided differences on the border.
inline GradientPair gradient(const Plane& img) {
  const int w = img.width(), h = img.height();
  if (w < 2 || h < 2)
    throw DimensionError("gradient needs at least 2 pixels along each axis");
  GradientPair g{Plane(w, h), Plane(w, h)};
  detail::for_rows(h, w, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0)
        g.dx(x, y) = img(1, y) - img(0, y);
      else if (x == w - 1)
        g.dx(x, y) = img(w - 1, y) - img(w - 2, y);
      else
        g.dx(x, y) = 0.5 * (img(x + 1, y) - img(x - 1, y));

      if (y == 0)
        g.dy(x, y) = img(x, 1) - img(x, 0);
      else if (y == h - 1)
        g.dy(x, y) = img(x, h - 1) - img(x, h - 2);
      else
        g.dy(x, y) = 0.5 * (img(x, y + 1) - img(x, y - 1));
    }
  });
  return g;
}

// Sampled Gaussian truncated at ceil(3 sigma), normalized to unit sum.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw UsageError("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable convolution with edge replication. Does not clamp, so it is
// also used for displacement components.
inline Plane gaussian_smooth(const Plane& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();
  Plane tmp(w, h), out(w, h);
  detail::for_rows(h, w, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * img.clamped(x + i, y);
      tmp(x, y) = acc;
    }
  });
  detail::for_rows(h, w, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * tmp.clamped(x, y + i);
      out(x, y) = acc;
    }
  });
  return out;
}

// Bilinear sample; coordinates outside the grid clamp to the border.
inline double sample_bilinear(const Plane& p, double fx, double fy) {
  const int w = p.width(), h = p.height();
  fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double tx = fx - x0, ty = fy - y0;
  const double top = p(x0, y0) + tx * (p(x1, y0) - p(x0, y0));
  const double bot = p(x0, y1) + tx * (p(x1, y1) - p(x0, y1));
  return top + ty * (bot - top);
}

// Pixel-center aligned bilinear resampling to an arbitrary size.
inline Plane resize(const Plane& p, int width, int height) {
  if (width < 1 || height < 1) throw DimensionError("resize to empty size");
  if (p.width() == width && p.height() == height) return p;
  Plane out(width, height);
  const double sx = static_cast<double>(p.width()) / width;
  const double sy = static_cast<double>(p.height()) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out(x, y) = sample_bilinear(p, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

inline ColorImage resize(const ColorImage& img, int width, int height) {
  return map_channels(img, [&](const Plane& p) { return resize(p, width, height); });
}

// 2x2 box-average decimation (odd trailing pixels are averaged with
// themselves).
inline Plane downsample_box2(const Plane& p) {
  const int w = (p.width() + 1) / 2, h = (p.height() + 1) / 2;
  Plane out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(x, y) = 0.25 * (p.clamped(2 * x, 2 * y) + p.clamped(2 * x + 1, 2 * y) +
                          p.clamped(2 * x, 2 * y + 1) + p.clamped(2 * x + 1, 2 * y + 1));
  return out;
}

}  // namespace demonpatch
