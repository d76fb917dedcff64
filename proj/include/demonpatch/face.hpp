#pragma once

#include <array>
#include <cmath>
#include <random>

#include "demonpatch/enhance.hpp"
#include "demonpatch/filter.hpp"
#include "demonpatch/image.hpp"

namespace demonpatch::synth {

using Rgb = std::array<double, 3>;

// Cartoon face: disk head on a flat backdrop, two elliptical eyes with
// round pupils, and a bar mouth with an optional dark opening.
// Geometry is in units of a 128x128 canvas; `scale` sets the pixel size.
struct FaceSpec {
  double scale = 1.0;
  double gaze_dx = 0;        // pupil offset, both eyes
  double mouth_open = 0;     // height of the dark opening in pixels
  double mouth_len = 36;
  double mouth_thick = 8;
  Rgb backdrop{0.30, 0.42, 0.60};
  Rgb skin{0.86, 0.66, 0.52};
  Rgb sclera{0.96, 0.96, 0.94};
  Rgb pupil{0.22, 0.12, 0.08};
  Rgb lips{0.35, 0.65, 0.30};
  Rgb opening{0.05, 0.30, 0.30};

  int width() const { return static_cast<int>(std::lround(128 * scale)); }
  int height() const { return width(); }
};

struct FaceLayout {
  double head_cx = 64, head_cy = 66, head_r = 52;
  double eye_y = 52, left_eye_x = 44, right_eye_x = 84;
  double eye_rx = 12, eye_ry = 7, pupil_r = 5.5;
  double mouth_cx = 64, mouth_cy = 92;
};

inline Rgb face_color(const FaceSpec& f, const FaceLayout& L, double px, double py) {
  auto in_disk = [](double x, double y, double cx, double cy, double r) {
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
  };
  for (double ex : {L.left_eye_x, L.right_eye_x}) {
    const double nx = (px - ex) / L.eye_rx, ny = (py - L.eye_y) / L.eye_ry;
    if (nx * nx + ny * ny <= 1.0)
      return in_disk(px, py, ex + f.gaze_dx, L.eye_y, L.pupil_r) ? f.pupil : f.sclera;
  }
  if (std::abs(px - L.mouth_cx) <= 0.5 * f.mouth_len) {
    const double half = 0.5 * f.mouth_thick + 0.5 * f.mouth_open;
    const double dy = std::abs(py - L.mouth_cy);
    if (dy <= 0.5 * f.mouth_open && std::abs(px - L.mouth_cx) <= 0.5 * f.mouth_len - 3) return f.opening;
    if (dy <= half) return f.lips;
  }
  if (in_disk(px, py, L.head_cx, L.head_cy, L.head_r)) return f.skin;
  return f.backdrop;
}

inline ColorImage render_face(const FaceSpec& f, const FaceLayout& L = {}) {
  constexpr int n = 4;
  ColorImage out(f.width(), f.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      Rgb acc{0, 0, 0};
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Rgb c = face_color(f, L, (x - 0.5 + (i + 0.5) / n) / f.scale, (y - 0.5 + (j + 0.5) / n) / f.scale);
          for (int k = 0; k < 3; ++k) acc[static_cast<std::size_t>(k)] += c[static_cast<std::size_t>(k)];
        }
      for (int k = 0; k < 3; ++k) out[k](x, y) = acc[static_cast<std::size_t>(k)] / (n * n);
    }
  return out;
}

inline PatchManifest face_manifest(const ColorImage& img, double scale = 1.0, const FaceLayout& L = {},
                                   std::string identity = "synthetic", std::string pose = "frontal") {
  auto box = [scale](double cx, double cy, int w, int h) {
    const int sw = static_cast<int>(std::lround(w * scale)), sh = static_cast<int>(std::lround(h * scale));
    return Rect{static_cast<int>(std::lround(cx * scale - 0.5 * sw)), static_cast<int>(std::lround(cy * scale - 0.5 * sh)),
                sw, sh};
  };
  PatchManifest m;
  m.image = img;
  m.identity = std::move(identity);
  m.pose = std::move(pose);
  m.entries = {
      {FeatureKind::head, box(L.head_cx, L.head_cy, 104, 104), std::nullopt},
      {FeatureKind::left_eye, box(L.left_eye_x, L.eye_y, 32, 20), std::nullopt},
      {FeatureKind::right_eye, box(L.right_eye_x, L.eye_y, 32, 20), std::nullopt},
      {FeatureKind::mouth, box(L.mouth_cx, L.mouth_cy, 48, 24), std::nullopt},
  };
  m.validate();
  return m;
}

struct Degradation {
  double brightness = 0.5;   // multiplicative gain
  bool down_up = true;       // 2x box downsample then bilinear upsample
  double noise_sigma = 0.05; // additive Gaussian, applied last
};

inline Plane degrade(const Plane& p, const Degradation& d, std::mt19937_64& rng) {
  Plane out = p;
  for (double& v : out.pixels()) v *= d.brightness;
  if (d.down_up) out = resize(downsample_box2(out), p.width(), p.height());
  if (d.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, d.noise_sigma);
    for (double& v : out.pixels()) v += noise(rng);
  }
  return clamp01(std::move(out));
}

inline ColorImage degrade(const ColorImage& img, const Degradation& d, std::mt19937_64& rng) {
  ColorImage out;
  for (int c = 0; c < 3; ++c) out[c] = degrade(img[c], d, rng);
  return out;
}

}  // namespace demonpatch::synth
