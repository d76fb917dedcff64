#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demonpatch/errors.hpp"
#include "demonpatch/image.hpp"

namespace demonpatch {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
}

inline double from_byte(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

// 8-bit gray or RGB PNG; gray files come back with three equal planes.
inline ColorImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  ColorImage out(w, h);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i)
    for (int c = 0; c < 3; ++c) out[c].pixels()[i] = from_byte(buf[3 * i + static_cast<std::size_t>(c)]);
  return out;
}

inline bool is_gray(const ColorImage& img) {
  return img[0] == img[1] && img[0] == img[2];
}

// Single intensity plane: the shared plane of a gray image, else luma.
inline Plane to_gray(const ColorImage& img) { return is_gray(img) ? img[0] : luminance(img); }

inline Plane read_png_gray(const std::filesystem::path& path) { return to_gray(read_png(path)); }

namespace detail {

inline void write_png_buffer(const std::filesystem::path& path, int width, int height,
                             std::uint32_t format, const std::vector<std::uint8_t>& buf) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw IoError("cannot write PNG '" + path.string() + "': " + image.message);
}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Plane& img) {
  std::vector<std::uint8_t> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) buf[i] = to_byte(img.pixels()[i]);
  detail::write_png_buffer(path, img.width(), img.height(), PNG_FORMAT_GRAY, buf);
}

inline void write_png(const std::filesystem::path& path, const ColorImage& img) {
  std::vector<std::uint8_t> buf(img[0].size() * 3);
  for (std::size_t i = 0; i < img[0].size(); ++i)
    for (int c = 0; c < 3; ++c) buf[3 * i + static_cast<std::size_t>(c)] = to_byte(img[c].pixels()[i]);
  detail::write_png_buffer(path, img.width(), img.height(), PNG_FORMAT_RGB, buf);
}

// Quantizes to 8 bits and back, matching what a PNG round trip yields.
inline Plane quantize8(Plane p) {
  for (double& v : p.pixels()) v = from_byte(to_byte(v));
  return p;
}

inline ColorImage quantize8(const ColorImage& img) {
  return map_channels(img, [](const Plane& p) { return quantize8(p); });
}

}  // namespace demonpatch
