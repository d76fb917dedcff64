#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "demonpatch/demon.hpp"
#include "demonpatch/image.hpp"
#include "demonpatch/parallel.hpp"

namespace demonpatch::synth {

struct Disk {
  double cx = 32, cy = 32, r = 12;
};
struct RectShape {
  double x = 0, y = 0, w = 0, h = 0;
};
struct Bar {
  double cx = 32, cy = 32, len = 40, thick = 8, angle_deg = 0;
};
// Elliptical sclera with a round pupil clipped to it; pupil_dx is the gaze.
struct Eye {
  double cx = 32, cy = 24, pupil_dx = 0;
  double rx = 26, ry = 13, pupil_r = 8;
  double sclera = 0.95;
};

using Shape = std::variant<Disk, RectShape, Bar, Eye>;

struct ShapeSpec {
  int width = 64, height = 64;
  Shape shape = Disk{};
  double fg = 0.2, bg = 0.9;
  bool antialias = true;
};

namespace detail {

// Intensity of the shape at a continuous point, or nullopt for background.
inline std::optional<double> shade(const ShapeSpec& spec, double px, double py) {
  return std::visit(
      [&](const auto& s) -> std::optional<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Disk>) {
          const double dx = px - s.cx, dy = py - s.cy;
          if (s.r > 0 && dx * dx + dy * dy <= s.r * s.r) return spec.fg;
        } else if constexpr (std::is_same_v<T, RectShape>) {
          if (px >= s.x - 0.5 && px < s.x + s.w - 0.5 && py >= s.y - 0.5 && py < s.y + s.h - 0.5)
            return spec.fg;
        } else if constexpr (std::is_same_v<T, Bar>) {
          const double a = s.angle_deg * std::numbers::pi / 180.0;
          const double dx = px - s.cx, dy = py - s.cy;
          const double along = dx * std::cos(a) + dy * std::sin(a);
          const double across = -dx * std::sin(a) + dy * std::cos(a);
          if (std::abs(along) <= 0.5 * s.len && std::abs(across) <= 0.5 * s.thick) return spec.fg;
        } else {
          const double ex = (px - s.cx) / s.rx, ey = (py - s.cy) / s.ry;
          if (ex * ex + ey * ey > 1.0) return std::nullopt;
          const double qx = px - (s.cx + s.pupil_dx), qy = py - s.cy;
          if (qx * qx + qy * qy <= s.pupil_r * s.pupil_r) return spec.fg;
          return s.sclera;
        }
        return std::nullopt;
      },
      spec.shape);
}

struct Extent {
  double x0, y0, x1, y1;
};

inline Extent extent(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> Extent {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Disk>) {
          return {s.cx - s.r, s.cy - s.r, s.cx + s.r, s.cy + s.r};
        } else if constexpr (std::is_same_v<T, RectShape>) {
          return {s.x - 0.5, s.y - 0.5, s.x + s.w - 0.5, s.y + s.h - 0.5};
        } else if constexpr (std::is_same_v<T, Bar>) {
          const double a = s.angle_deg * std::numbers::pi / 180.0;
          const double hx = 0.5 * (std::abs(s.len * std::cos(a)) + std::abs(s.thick * std::sin(a)));
          const double hy = 0.5 * (std::abs(s.len * std::sin(a)) + std::abs(s.thick * std::cos(a)));
          return {s.cx - hx, s.cy - hy, s.cx + hx, s.cy + hy};
        } else {
          return {s.cx - s.rx, s.cy - s.ry, s.cx + s.rx, s.cy + s.ry};
        }
      },
      shape);
}

}  // namespace detail

inline void validate(const ShapeSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw DimensionError("empty canvas");
  if (spec.fg == spec.bg) throw UsageError("foreground and background intensities must differ");
  if (spec.fg < 0 || spec.fg > 1 || spec.bg < 0 || spec.bg > 1)
    throw UsageError("shape intensities must lie in [0,1]");
  if (const auto* d = std::get_if<Disk>(&spec.shape); d && d->r <= 0) return;
  const auto e = detail::extent(spec.shape);
  constexpr double slack = 1e-9;
  if (e.x0 < -0.5 - slack || e.y0 < -0.5 - slack || e.x1 > spec.width - 0.5 + slack ||
      e.y1 > spec.height - 0.5 + slack)
    throw DimensionError("shape does not fit the canvas");
}

inline constexpr int kCoverageSamples = 4;  // per axis

inline Plane render(const ShapeSpec& spec) {
  validate(spec);
  Plane out(spec.width, spec.height, spec.bg);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      if (!spec.antialias) {
        if (auto v = detail::shade(spec, x, y)) out(x, y) = *v;
        continue;
      }
      double acc = 0.0;
      for (int j = 0; j < kCoverageSamples; ++j)
        for (int i = 0; i < kCoverageSamples; ++i) {
          const double px = x - 0.5 + (i + 0.5) / kCoverageSamples;
          const double py = y - 0.5 + (j + 0.5) / kCoverageSamples;
          acc += detail::shade(spec, px, py).value_or(spec.bg);
        }
      out(x, y) = acc / (kCoverageSamples * kCoverageSamples);
    }
  return out;
}

enum class ExperimentKind { translation, rotation, scaling, gaze };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::translation: return "translation";
    case ExperimentKind::rotation: return "rotation";
    case ExperimentKind::scaling: return "scaling";
    default: return "gaze";
  }
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "translation") return ExperimentKind::translation;
  if (s == "rotation") return ExperimentKind::rotation;
  if (s == "scaling") return ExperimentKind::scaling;
  if (s == "gaze") return ExperimentKind::gaze;
  throw UsageError("unknown experiment kind '" + std::string(s) +
                   "' (translation|rotation|scaling|gaze)");
}

// Re-rasterizes the transformed shape. Translation moves along x, rotation
// and scaling act about the shape's own center, gaze moves the pupil.
inline ShapeSpec transformed(ShapeSpec spec, ExperimentKind kind, double value) {
  std::visit(
      [&](auto& s) {
        using T = std::decay_t<decltype(s)>;
        switch (kind) {
          case ExperimentKind::translation:
            if constexpr (std::is_same_v<T, RectShape>) s.x += value;
            else s.cx += value;
            break;
          case ExperimentKind::rotation:
            if constexpr (std::is_same_v<T, Bar>) s.angle_deg += value;
            else throw UsageError("rotation experiments need a bar shape");
            break;
          case ExperimentKind::scaling:
            if constexpr (std::is_same_v<T, Disk>) {
              s.r *= value;
            } else if constexpr (std::is_same_v<T, RectShape>) {
              const double cx = s.x + 0.5 * s.w, cy = s.y + 0.5 * s.h;
              s.w *= value;
              s.h *= value;
              s.x = cx - 0.5 * s.w;
              s.y = cy - 0.5 * s.h;
            } else if constexpr (std::is_same_v<T, Bar>) {
              s.len *= value;
              s.thick *= value;
            } else {
              s.rx *= value;
              s.ry *= value;
              s.pupil_r *= value;
            }
            break;
          case ExperimentKind::gaze:
            if constexpr (std::is_same_v<T, Eye>) s.pupil_dx += value;
            else throw UsageError("gaze experiments need an eye shape");
            break;
        }
      },
      spec.shape);
  return spec;
}

// Defaults: 64x64 light canvas with a dark object.
inline ShapeSpec default_base(ExperimentKind kind) {
  ShapeSpec spec;
  switch (kind) {
    case ExperimentKind::translation:
      spec.shape = Disk{32, 32, 12};
      break;
    case ExperimentKind::scaling:
      spec.shape = Disk{32, 32, 20};
      break;
    case ExperimentKind::rotation:
      spec.shape = Bar{32, 32, 44, 10, 0};
      break;
    case ExperimentKind::gaze:
      spec.width = 64;
      spec.height = 48;
      spec.shape = Eye{};
      spec.fg = 0.1;
      spec.bg = 0.55;
      break;
  }
  return spec;
}

inline std::vector<double> default_values(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::translation:
      return {-15, -14, -13, -12, -11, -10, -9, -8, -7, -6, -5, -4, -3, -2, -1};
    case ExperimentKind::rotation: return {4, 14, 20, 30};
    case ExperimentKind::scaling: return {0.5, 0.8, 1.2, 1.5};
    default: return {-15, -7, -5, 5};
  }
}

struct ExperimentGrid {
  ExperimentKind kind = ExperimentKind::translation;
  std::vector<double> values;
  ShapeSpec base;
  RegistrationConfig reg;
  double c_scale = 1.0;
  std::optional<double> history_value;  // emits the per-iteration MAE of this grid value

  void validate() const {
    if (values.empty()) throw UsageError("experiment grid has no values");
    if (!std::is_sorted(values.begin(), values.end()))
      throw UsageError("experiment grid values must be sorted");
    if (!(c_scale > 0.0)) throw UsageError("c_scale must be > 0");
    reg.validate();
  }
};

struct CurveRecord {
  double value = 0;
  double d_t = 0;
  double mae_initial = 0;
  double mae_final = 0;
  double success_ratio = 0;
};

struct GridResult {
  ExperimentKind kind{};
  std::vector<CurveRecord> records;
  std::vector<double> history;  // empty unless history_value was set
  // source, deformed, target per grid value
  std::vector<std::array<Plane, 3>> triptychs;
};

inline GridResult run_grid(const ExperimentGrid& grid, bool keep_triptychs = false) {
  grid.validate();
  const Plane source = render(grid.base);
  std::vector<RegistrationResult> runs(grid.values.size());
  std::vector<Plane> targets(grid.values.size());
  parallel::for_each_index(0, grid.values.size(), [&](std::size_t i) {
    targets[i] = render(transformed(grid.base, grid.kind, grid.values[i]));
    runs[i] = demon_register(source, targets[i], grid.reg);
  });

  GridResult out;
  out.kind = grid.kind;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    out.records.push_back({grid.values[i], grid.c_scale * r.final_mae(), r.initial_mae, r.final_mae(),
                           r.success_ratio()});
    if (grid.history_value && *grid.history_value == grid.values[i]) out.history = r.mae_history;
    if (keep_triptychs) out.triptychs.push_back({source, r.deformed, targets[i]});
  }
  return out;
}

struct LineFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) throw UsageError("line fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw UsageError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

// Least-squares slopes of y against |x| on either side of a breaking point
// (the breaking point belongs to both segments).
struct TwoRegimeSlopes {
  double breaking_point = 0;
  double pre_slope = 0;
  double post_slope = 0;
};

inline TwoRegimeSlopes two_regime_slopes(const std::vector<double>& abs_x, const std::vector<double>& ys,
                                         double breaking_point) {
  std::vector<double> px, py, qx, qy;
  for (std::size_t i = 0; i < abs_x.size(); ++i) {
    if (abs_x[i] <= breaking_point) {
      px.push_back(abs_x[i]);
      py.push_back(ys[i]);
    }
    if (abs_x[i] >= breaking_point) {
      qx.push_back(abs_x[i]);
      qy.push_back(ys[i]);
    }
  }
  return {breaking_point, fit_line(px, py).slope, fit_line(qx, qy).slope};
}

struct GazeReport {
  GridResult curve;
  LineFit mae_fit;           // raw source-to-target MAE against |gaze|
  TwoRegimeSlopes d_t_slopes;  // D_T, split at the detected breaking point
};

// Breaking point: the grid magnitude that maximizes the post/pre slope
// ratio of D_T, among points leaving at least two distinct magnitudes on
// each side.
inline double detect_breaking_point(const std::vector<double>& abs_x, const std::vector<double>& ys) {
  std::vector<double> mags(abs_x);
  std::sort(mags.begin(), mags.end());
  mags.erase(std::unique(mags.begin(), mags.end()), mags.end());
  if (mags.size() < 3) throw UsageError("breaking point detection needs three distinct magnitudes");
  double best = mags[1], best_ratio = -1e300;
  for (std::size_t k = 1; k + 1 < mags.size(); ++k) {
    const auto s = two_regime_slopes(abs_x, ys, mags[k]);
    const double ratio = s.post_slope / std::max(std::abs(s.pre_slope), 1e-12);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = mags[k];
    }
  }
  return best;
}

inline GazeReport analyze_gaze(GridResult curve, std::optional<double> breaking_point = {}) {
  if (curve.kind != ExperimentKind::gaze) throw UsageError("gaze analysis needs a gaze grid");
  GazeReport rep;
  rep.curve = std::move(curve);
  std::vector<double> ax, mae, dt;
  for (const auto& r : rep.curve.records) {
    ax.push_back(std::abs(r.value));
    mae.push_back(r.mae_initial);
    dt.push_back(r.d_t);
  }
  // gaze 0 is the shared origin of both curves
  if (std::find(ax.begin(), ax.end(), 0.0) == ax.end()) {
    ax.push_back(0.0);
    mae.push_back(0.0);
    dt.push_back(0.0);
  }
  rep.mae_fit = fit_line(ax, mae);
  const double bp = breaking_point ? *breaking_point : detect_breaking_point(ax, dt);
  rep.d_t_slopes = two_regime_slopes(ax, dt, bp);
  return rep;
}

inline GazeReport gaze_experiment(const ExperimentGrid& grid, std::optional<double> breaking_point = {}) {
  if (grid.kind != ExperimentKind::gaze) throw UsageError("gaze_experiment needs a gaze grid");
  return analyze_gaze(run_grid(grid), breaking_point);
}

inline std::string curve_csv(const GridResult& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "kind,value,d_t,mae_initial,mae_final,success_ratio\n";
  for (const auto& c : r.records)
    os << to_string(r.kind) << ',' << c.value << ',' << c.d_t << ',' << c.mae_initial << ','
       << c.mae_final << ',' << c.success_ratio << '\n';
  return os.str();
}

inline std::string history_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << "iteration,mae\n";
  for (std::size_t i = 0; i < history.size(); ++i) os << (i + 1) << ',' << history[i] << '\n';
  return os.str();
}

// Side-by-side source | deformed | target strip with a 2 px separator.
inline Plane triptych(const std::array<Plane, 3>& panels) {
  const int w = panels[0].width(), h = panels[0].height();
  Plane out(3 * w + 4, h, 1.0);
  for (int p = 0; p < 3; ++p) paste(out, panels[static_cast<std::size_t>(p)], p * (w + 2), 0);
  return out;
}

}  // namespace demonpatch::synth
