#pragma once

#include <vector>

#include "demonpatch/filter.hpp"
#include "demonpatch/image.hpp"

namespace demonpatch {

inline constexpr double kPyramidSigma = 1.0;

inline void check_pyramid_levels(int width, int height, int levels) {
  if (levels < 1) throw UsageError("pyramid needs at least one level");
  if (levels > 30 || width < (1 << (levels - 1)) || height < (1 << (levels - 1)))
    throw DimensionError("too many pyramid levels for a " + std::to_string(width) + "x" +
                         std::to_string(height) + " image");
}

// Keeps even-indexed samples.
inline Plane decimate2(const Plane& p) {
  Plane out((p.width() + 1) / 2, (p.height() + 1) / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = p(2 * x, 2 * y);
  return out;
}

// Inverse lattice of decimate2: coarse sample j sits at fine position 2j.
inline Plane expand2(const Plane& coarse, int width, int height) {
  Plane out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out(x, y) = sample_bilinear(coarse, 0.5 * x, 0.5 * y);
  return out;
}

inline std::vector<Plane> build_gaussian_pyramid(const Plane& img, int levels) {
  check_pyramid_levels(img.width(), img.height(), levels);
  std::vector<Plane> pyr;
  pyr.reserve(static_cast<std::size_t>(levels));
  pyr.push_back(img);
  for (int l = 1; l < levels; ++l) pyr.push_back(decimate2(gaussian_smooth(pyr.back(), kPyramidSigma)));
  return pyr;
}

// Band-pass levels plus the coarsest Gaussian level as the last entry.
inline std::vector<Plane> build_laplacian_pyramid(const Plane& img, int levels) {
  auto gauss = build_gaussian_pyramid(img, levels);
  std::vector<Plane> lap(gauss.size());
  for (std::size_t l = 0; l + 1 < gauss.size(); ++l) {
    const Plane up = expand2(gauss[l + 1], gauss[l].width(), gauss[l].height());
    Plane band = gauss[l];
    for (std::size_t i = 0; i < band.size(); ++i) band.pixels()[i] -= up.pixels()[i];
    lap[l] = std::move(band);
  }
  lap.back() = std::move(gauss.back());
  return lap;
}

inline Plane collapse_laplacian_pyramid(const std::vector<Plane>& lap) {
  if (lap.empty()) throw UsageError("empty pyramid");
  Plane acc = lap.back();
  for (std::size_t l = lap.size() - 1; l-- > 0;) {
    Plane up = expand2(acc, lap[l].width(), lap[l].height());
    for (std::size_t i = 0; i < up.size(); ++i) up.pixels()[i] += lap[l].pixels()[i];
    acc = std::move(up);
  }
  return acc;
}

inline Plane blend_multiresolution(const Plane& base, const Plane& insert, const Plane& mask,
                                   int levels) {
  require_same_shape(base, insert, "blend_multiresolution");
  require_same_shape(base, mask, "blend_multiresolution mask");
  const auto lb = build_laplacian_pyramid(base, levels);
  const auto li = build_laplacian_pyramid(insert, levels);
  const auto gm = build_gaussian_pyramid(mask, levels);
  std::vector<Plane> mixed(lb.size());
  for (std::size_t l = 0; l < lb.size(); ++l) {
    Plane m = lb[l];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double wgt = gm[l].pixels()[i];
      m.pixels()[i] = (1.0 - wgt) * lb[l].pixels()[i] + wgt * li[l].pixels()[i];
    }
    mixed[l] = std::move(m);
  }
  return clamp01(collapse_laplacian_pyramid(mixed));
}

inline ColorImage blend_multiresolution(const ColorImage& base, const ColorImage& insert,
                                        const BlendMask& mask, int levels) {
  if (!base.same_shape(insert)) throw DimensionError("blend_multiresolution: image size mismatch");
  if (!mask.weights.same_shape(base[0])) throw DimensionError("blend_multiresolution: mask size mismatch");
  ColorImage out;
  for (int c = 0; c < 3; ++c) out[c] = blend_multiresolution(base[c], insert[c], mask.weights, levels);
  return out;
}

}  // namespace demonpatch
