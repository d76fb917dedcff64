#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "demonpatch/field.hpp"
#include "demonpatch/filter.hpp"
#include "demonpatch/image.hpp"

namespace demonpatch {

// basic:      (m-s) grad s / |grad s|^2
// stabilized: (m-s) grad s / (|grad s|^2 + alpha^2 (m-s)^2)
// dual:       stabilized plus the same term driven by grad m
enum class ForceMode { basic, stabilized, dual };

inline std::string_view to_string(ForceMode m) {
  switch (m) {
    case ForceMode::basic: return "basic";
    case ForceMode::stabilized: return "stabilized";
    default: return "dual";
  }
}

inline ForceMode parse_force_mode(std::string_view s) {
  if (s == "basic") return ForceMode::basic;
  if (s == "stabilized") return ForceMode::stabilized;
  if (s == "dual") return ForceMode::dual;
  throw UsageError("unknown force mode '" + std::string(s) + "' (basic|stabilized|dual)");
}

inline constexpr double kDenominatorGuard = 1e-12;

struct RegistrationConfig {
  double alpha = 2.5;
  double sigma_reg = 1.0;
  int iterations = 200;
  ForceMode force_mode = ForceMode::dual;
  int record_every = 0;  // snapshot stride, 0 disables snapshots

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw UsageError("alpha must be > 0");
    if (!(sigma_reg > 0.0) || !std::isfinite(sigma_reg)) throw UsageError("sigma_reg must be > 0");
    if (iterations < 1) throw UsageError("iterations must be >= 1");
    if (record_every < 0) throw UsageError("record_every must be >= 0");
  }
};

struct Snapshot {
  int iteration = 0;
  Plane image;
};

struct RegistrationResult {
  DisplacementField total_field;
  Plane deformed;
  double initial_mae = 0.0;
  std::vector<double> mae_history;  // entry i is the MAE after iteration i+1
  std::vector<Snapshot> snapshots;

  double final_mae() const { return mae_history.empty() ? initial_mae : mae_history.back(); }
  double success_ratio() const { return initial_mae > 0.0 ? final_mae() / initial_mae : 0.0; }
};

namespace detail {

inline double guarded_ratio(double numer, double denom) {
  return denom < kDenominatorGuard ? 0.0 : numer / denom;
}

}  // namespace detail

inline DisplacementField demon_force(const Plane& m_cur, const Plane& s, const GradientPair& grad_s,
                                     const GradientPair& grad_m_cur, double alpha, ForceMode mode) {
  require_same_shape(m_cur, s, "demon_force");
  require_same_shape(s, grad_s.dx, "demon_force static gradient");
  require_same_shape(s, grad_s.dy, "demon_force static gradient");
  if (mode == ForceMode::dual) {
    require_same_shape(s, grad_m_cur.dx, "demon_force moving gradient");
    require_same_shape(s, grad_m_cur.dy, "demon_force moving gradient");
  }
  const double a2 = alpha * alpha;
  const int w = s.width(), h = s.height();
  DisplacementField u(w, h);
  detail::for_rows(h, w, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double diff = m_cur(x, y) - s(x, y);
      if (diff == 0.0) continue;
      const double sx = grad_s.dx(x, y), sy = grad_s.dy(x, y);
      const double s_norm = sx * sx + sy * sy;
      const double static_denom = mode == ForceMode::basic ? s_norm : s_norm + a2 * diff * diff;
      const double ks = detail::guarded_ratio(diff, static_denom);
      double ux = ks * sx, uy = ks * sy;
      if (mode == ForceMode::dual) {
        const double mx = grad_m_cur.dx(x, y), my = grad_m_cur.dy(x, y);
        const double km = detail::guarded_ratio(diff, mx * mx + my * my + a2 * diff * diff);
        ux += km * mx;
        uy += km * my;
      }
      u.dx(x, y) = ux;
      u.dy(x, y) = uy;
    }
  });
  return u;
}

// Called after every iteration with the iteration number (1-based), the
// currently warped moving image and the accumulated field.
using RegistrationObserver =
    std::function<void(int iteration, const Plane& warped, const DisplacementField& total)>;

// Time-limited Demon registration: exactly cfg.iterations passes of
// force, Gaussian regularization of the increment, accumulation, and
// re-warping of the original moving image.
inline RegistrationResult demon_register(const Plane& m, const Plane& s, const RegistrationConfig& cfg,
                                         const RegistrationObserver& observer = {}) {
  cfg.validate();
  require_same_shape(m, s, "register");
  const GradientPair grad_s = gradient(s);

  RegistrationResult res;
  res.total_field = DisplacementField(m.width(), m.height());
  res.deformed = m;
  res.initial_mae = mean_abs_diff(m, s);
  res.mae_history.reserve(static_cast<std::size_t>(cfg.iterations));

  GradientPair grad_m;
  for (int it = 1; it <= cfg.iterations; ++it) {
    if (cfg.force_mode == ForceMode::dual) grad_m = gradient(res.deformed);
    const DisplacementField force =
        demon_force(res.deformed, s, grad_s, grad_m, cfg.alpha, cfg.force_mode);
    if (!force.is_zero()) {
      const Plane fx = gaussian_smooth(force.dx, cfg.sigma_reg);
      const Plane fy = gaussian_smooth(force.dy, cfg.sigma_reg);
      for (std::size_t i = 0; i < fx.size(); ++i) {
        res.total_field.dx.pixels()[i] += fx.pixels()[i];
        res.total_field.dy.pixels()[i] += fy.pixels()[i];
      }
      res.deformed = warp(m, res.total_field);
    }
    res.mae_history.push_back(mean_abs_diff(res.deformed, s));
    if (cfg.record_every > 0 && it % cfg.record_every == 0) res.snapshots.push_back({it, res.deformed});
    if (observer) observer(it, res.deformed, res.total_field);
  }
  return res;
}

// Warped moving image at each requested iteration count (0 is m itself).
inline std::vector<Plane> interpolate_path(const Plane& m, const Plane& s, const RegistrationConfig& cfg,
                                           const std::vector<int>& steps) {
  cfg.validate();
  require_same_shape(m, s, "interpolate_path");
  if (!std::is_sorted(steps.begin(), steps.end())) throw UsageError("path steps must be sorted");
  for (int st : steps) {
    if (st < 0) throw UsageError("path steps must be non-negative");
    if (st > cfg.iterations)
      throw UsageError("path step " + std::to_string(st) + " exceeds the iteration budget " +
                       std::to_string(cfg.iterations));
  }
  std::vector<Plane> out;
  out.reserve(steps.size());
  if (steps.empty()) return out;
  std::size_t next = 0;
  while (next < steps.size() && steps[next] == 0) {
    out.push_back(m);
    ++next;
  }
  if (next == steps.size()) return out;

  RegistrationConfig run = cfg;
  run.iterations = steps.back();
  run.record_every = 0;
  demon_register(m, s, run, [&](int it, const Plane& warped, const DisplacementField&) {
    while (next < steps.size() && steps[next] == it) {
      out.push_back(warped);
      ++next;
    }
  });
  return out;
}

}  // namespace demonpatch
