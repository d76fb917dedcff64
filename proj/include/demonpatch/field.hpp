#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "demonpatch/filter.hpp"
#include "demonpatch/image.hpp"

namespace demonpatch {

// Per-pixel displacement in pixels. Output pixel x of a warp takes the
// moving image at x - u(x), so u points along the motion of image content.
struct DisplacementField {
  Plane dx;
  Plane dy;

  DisplacementField() = default;
  DisplacementField(int width, int height) : dx(width, height), dy(width, height) {}
  DisplacementField(Plane x, Plane y) : dx(std::move(x)), dy(std::move(y)) {
    require_same_shape(dx, dy, "DisplacementField");
  }

  int width() const noexcept { return dx.width(); }
  int height() const noexcept { return dx.height(); }

  bool all_finite() const {
    for (double v : dx.pixels())
      if (!std::isfinite(v)) return false;
    for (double v : dy.pixels())
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool is_zero() const {
    for (double v : dx.pixels())
      if (v != 0.0) return false;
    for (double v : dy.pixels())
      if (v != 0.0) return false;
    return true;
  }

  friend bool operator==(const DisplacementField&, const DisplacementField&) = default;
};

// Backward bilinear warp without output clamping.
inline Plane warp_plane(const Plane& img, const DisplacementField& field) {
  require_same_shape(img, field.dx, "warp");
  const int w = img.width(), h = img.height();
  Plane out(w, h);
  detail::for_rows(h, w, [&](int y) {
    for (int x = 0; x < w; ++x)
      out(x, y) = sample_bilinear(img, x - field.dx(x, y), y - field.dy(x, y));
  });
  return out;
}

inline Plane warp(const Plane& img, const DisplacementField& field) {
  return clamp01(warp_plane(img, field));
}

inline ColorImage warp(const ColorImage& img, const DisplacementField& field) {
  return map_channels(img, [&](const Plane& p) { return warp(p, field); });
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

// "DMNF", u32 width, u32 height, then float32 dx plane and dy plane,
// row-major, all little-endian.
inline void write_field(std::ostream& os, const DisplacementField& f) {
  os.write("DMNF", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(f.width()));
  detail::put_u32(os, static_cast<std::uint32_t>(f.height()));
  for (const Plane* p : {&f.dx, &f.dy})
    for (double v : p->pixels()) detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw IoError("failed writing displacement field");
}

inline DisplacementField read_field(std::istream& is) {
  unsigned char header[12];
  if (!is.read(reinterpret_cast<char*>(header), 12))
    throw FormatError("displacement field: truncated header");
  if (std::memcmp(header, "DMNF", 4) != 0)
    throw FormatError("displacement field: bad magic");
  const std::uint32_t w = detail::get_u32(header + 4);
  const std::uint32_t h = detail::get_u32(header + 8);
  if (w > 1u << 16 || h > 1u << 16) throw FormatError("displacement field: implausible size");
  DisplacementField f(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 4);
  for (Plane* p : {&f.dx, &f.dy}) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw FormatError("displacement field: truncated payload");
    for (std::size_t i = 0; i < p->size(); ++i)
      p->pixels()[i] = std::bit_cast<float>(detail::get_u32(buf.data() + 4 * i));
  }
  return f;
}

}  // namespace demonpatch
