#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "demonpatch/errors.hpp"

namespace demonpatch {

// Row-major 2-D grid of reals. Intensity images keep values in [0,1];
// derivative and displacement planes use the same container unrestricted.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0)
      : width_(width), height_(height) {
    if (width < 0 || height < 0)
      throw DimensionError("negative image dimensions");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Plane(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height)
      throw DimensionError("data length does not match width x height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  double operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  // Border-replicating access.
  double clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
  }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  std::span<const double> row(int y) const noexcept {
    return std::span<const double>(data_).subspan(
        static_cast<std::size_t>(y) * width_, width_);
  }

  bool same_shape(const Plane& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

using ScalarImage = Plane;

struct ColorImage {
  std::array<Plane, 3> rgb;

  ColorImage() = default;
  ColorImage(int width, int height, double fill = 0.0)
      : rgb{Plane(width, height, fill), Plane(width, height, fill),
            Plane(width, height, fill)} {}
  ColorImage(Plane r, Plane g, Plane b) : rgb{std::move(r), std::move(g), std::move(b)} {
    if (!rgb[0].same_shape(rgb[1]) || !rgb[0].same_shape(rgb[2]))
      throw DimensionError("color planes differ in size");
  }
  static ColorImage gray(const Plane& p) { return ColorImage(p, p, p); }

  int width() const noexcept { return rgb[0].width(); }
  int height() const noexcept { return rgb[0].height(); }
  Plane& operator[](int c) { return rgb[static_cast<std::size_t>(c)]; }
  const Plane& operator[](int c) const { return rgb[static_cast<std::size_t>(c)]; }
  bool same_shape(const ColorImage& o) const noexcept {
    return rgb[0].same_shape(o.rgb[0]);
  }

  friend bool operator==(const ColorImage&, const ColorImage&) = default;
};

struct HsvImage {
  Plane h, s, v;
  int width() const noexcept { return v.width(); }
  int height() const noexcept { return v.height(); }
};

enum class HsvChannel { hue, saturation, value };

// Blend weights in [0,1]; 1 selects the inserted image.
struct BlendMask {
  Plane weights;
  int width() const noexcept { return weights.width(); }
  int height() const noexcept { return weights.height(); }
};

inline void require_same_shape(const Plane& a, const Plane& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline Plane clamp01(Plane p) {
  for (double& v : p.pixels()) v = clamp01(v);
  return p;
}

inline double mean(const Plane& p) {
  if (p.empty()) return 0.0;
  double acc = 0.0;
  for (double v : p.pixels()) acc += v;
  return acc / static_cast<double>(p.size());
}

inline double mean_abs_diff(const Plane& a, const Plane& b) {
  require_same_shape(a, b, "mean_abs_diff");
  if (a.empty()) return 0.0;
  // Row partial sums keep the reduction order fixed.
  double acc = 0.0;
  for (int y = 0; y < a.height(); ++y) {
    double row = 0.0;
    const auto ra = a.row(y);
    const auto rb = b.row(y);
    for (std::size_t x = 0; x < ra.size(); ++x) row += std::abs(ra[x] - rb[x]);
    acc += row;
  }
  return acc / static_cast<double>(a.size());
}

inline double mean_abs_diff(const ColorImage& a, const ColorImage& b) {
  return (mean_abs_diff(a[0], b[0]) + mean_abs_diff(a[1], b[1]) +
          mean_abs_diff(a[2], b[2])) /
         3.0;
}

// Hexcone model. Hue is normalized to [0,1) and defined as 0 when the
// pixel is achromatic.
inline std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double chroma = mx - mn;
  const double v = mx;
  const double s = mx > 0.0 ? chroma / mx : 0.0;
  double h = 0.0;
  if (chroma > 0.0) {
    if (mx == r) {
      h = (g - b) / chroma;
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / chroma + 2.0;
    } else {
      h = (r - g) / chroma + 4.0;
    }
    h /= 6.0;
    if (h >= 1.0) h -= 1.0;
  }
  return {h, s, v};
}

inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  if (s <= 0.0) return {v, v, v};
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline HsvImage rgb_to_hsv(const ColorImage& img) {
  HsvImage out{Plane(img.width(), img.height()), Plane(img.width(), img.height()),
               Plane(img.width(), img.height())};
  for (std::size_t i = 0; i < img[0].size(); ++i) {
    const auto hsv = rgb_to_hsv(img[0].pixels()[i], img[1].pixels()[i], img[2].pixels()[i]);
    out.h.pixels()[i] = hsv[0];
    out.s.pixels()[i] = hsv[1];
    out.v.pixels()[i] = hsv[2];
  }
  return out;
}

inline ColorImage hsv_to_rgb(const HsvImage& img) {
  ColorImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    const auto rgb = hsv_to_rgb(img.h.pixels()[i], clamp01(img.s.pixels()[i]),
                                clamp01(img.v.pixels()[i]));
    for (int c = 0; c < 3; ++c) out[c].pixels()[i] = clamp01(rgb[static_cast<std::size_t>(c)]);
  }
  return out;
}

inline const Plane& channel(const HsvImage& img, HsvChannel c) {
  switch (c) {
    case HsvChannel::hue: return img.h;
    case HsvChannel::saturation: return img.s;
    default: return img.v;
  }
}

inline Plane& channel(HsvImage& img, HsvChannel c) {
  return const_cast<Plane&>(channel(static_cast<const HsvImage&>(img), c));
}

// Rec. 601 luma, used for gray PNG output of color data and for synthetic
// quality measures.
inline Plane luminance(const ColorImage& img) {
  Plane out(img.width(), img.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels()[i] = 0.299 * img[0].pixels()[i] + 0.587 * img[1].pixels()[i] +
                      0.114 * img[2].pixels()[i];
  return out;
}

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

inline bool inside(const Rect& r, int width, int height) {
  return r.w > 0 && r.h > 0 && r.x >= 0 && r.y >= 0 && r.x + r.w <= width &&
         r.y + r.h <= height;
}

inline Plane crop(const Plane& p, const Rect& r) {
  if (!inside(r, p.width(), p.height()))
    throw DimensionError("crop rectangle outside image bounds");
  Plane out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out(x, y) = p(r.x + x, r.y + y);
  return out;
}

inline ColorImage crop(const ColorImage& img, const Rect& r) {
  return ColorImage(crop(img[0], r), crop(img[1], r), crop(img[2], r));
}

inline void paste(Plane& dst, const Plane& src, int x0, int y0) {
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      const int xx = x0 + x, yy = y0 + y;
      if (xx >= 0 && yy >= 0 && xx < dst.width() && yy < dst.height())
        dst(xx, yy) = src(x, y);
    }
}

inline void paste(ColorImage& dst, const ColorImage& src, int x0, int y0) {
  for (int c = 0; c < 3; ++c) paste(dst[c], src[c], x0, y0);
}

template <class Fn>
ColorImage map_channels(const ColorImage& img, Fn&& fn) {
  return ColorImage(fn(img[0]), fn(img[1]), fn(img[2]));
}

}  // namespace demonpatch
