#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "demonpatch/demon.hpp"
#include "demonpatch/histogram.hpp"
#include "demonpatch/image.hpp"
#include "demonpatch/parallel.hpp"

namespace demonpatch {

enum class FeatureKind { left_eye, right_eye, mouth, head };

inline constexpr FeatureKind kAllFeatureKinds[] = {FeatureKind::left_eye, FeatureKind::right_eye,
                                                   FeatureKind::mouth, FeatureKind::head};

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::left_eye: return "left_eye";
    case FeatureKind::right_eye: return "right_eye";
    case FeatureKind::mouth: return "mouth";
    default: return "head";
  }
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  for (FeatureKind k : kAllFeatureKinds)
    if (to_string(k) == s) return k;
  throw UsageError("unknown feature kind '" + std::string(s) + "' (left_eye|right_eye|mouth|head)");
}

inline std::string_view to_string(HsvChannel c) {
  switch (c) {
    case HsvChannel::hue: return "hue";
    case HsvChannel::saturation: return "saturation";
    default: return "value";
  }
}

inline HsvChannel parse_channel(std::string_view s) {
  if (s == "hue" || s == "h") return HsvChannel::hue;
  if (s == "saturation" || s == "s") return HsvChannel::saturation;
  if (s == "value" || s == "v") return HsvChannel::value;
  throw UsageError("unknown channel '" + std::string(s) + "' (hue|saturation|value)");
}

// Mouths are compared on hue; eyes and heads on value.
inline HsvChannel channel_for(FeatureKind k) {
  return k == FeatureKind::mouth ? HsvChannel::hue : HsvChannel::value;
}

struct AffinityConfig {
  RegistrationConfig reg;
  double c_scale = 1.0;
  bool pre_equalize = true;
  std::optional<HsvChannel> channel_override;

  void validate() const {
    reg.validate();
    if (!(c_scale > 0.0) || !std::isfinite(c_scale)) throw UsageError("c_scale must be > 0");
  }

  HsvChannel channel(FeatureKind k) const { return channel_override.value_or(channel_for(k)); }
};

struct AffinityScore {
  double distance = 0.0;
  std::string moving_id;
  std::string static_id;
  FeatureKind channel = FeatureKind::left_eye;
};

inline Plane select_channel(const ColorImage& img, HsvChannel c) {
  const HsvImage hsv = rgb_to_hsv(img);
  return channel(hsv, c);
}

inline Plane select_channel(const ColorImage& img, FeatureKind kind) {
  return select_channel(img, channel_for(kind));
}

// The two planes registration runs on: the kind's channel, equalized when
// the config asks for illumination adjustment.
struct ChannelPair {
  Plane moving;
  Plane fixed;
};

inline ChannelPair prepare_channels(const ColorImage& m, const ColorImage& s, FeatureKind kind,
                                    const AffinityConfig& cfg) {
  if (!m.same_shape(s)) throw DimensionError("demon_distance: image size mismatch");
  ChannelPair p{select_channel(m, cfg.channel(kind)), select_channel(s, cfg.channel(kind))};
  if (cfg.pre_equalize) {
    p.moving = histogram_equalize(p.moving);
    p.fixed = histogram_equalize(p.fixed);
  }
  return p;
}

// Residual left after exactly T iterations of registering m onto s, scaled
// by C: not symmetric, no triangle inequality.
inline AffinityScore demon_distance(const ColorImage& m, const ColorImage& s, FeatureKind kind,
                                    const AffinityConfig& cfg, std::string moving_id = {},
                                    std::string static_id = {}) {
  cfg.validate();
  const ChannelPair p = prepare_channels(m, s, kind, cfg);
  const RegistrationResult r = demon_register(p.moving, p.fixed, cfg.reg);
  return {cfg.c_scale * r.final_mae(), std::move(moving_id), std::move(static_id), kind};
}

inline std::vector<AffinityScore> distance_curve(const ColorImage& source, const std::vector<ColorImage>& targets,
                                                 FeatureKind kind, const AffinityConfig& cfg) {
  cfg.validate();
  for (const auto& t : targets)
    if (!t.same_shape(source)) throw DimensionError("distance_curve: target size mismatch");
  std::vector<AffinityScore> out(targets.size());
  parallel::for_each_index(0, targets.size(), [&](std::size_t i) {
    out[i] = demon_distance(source, targets[i], kind, cfg, "source", std::to_string(i));
  });
  return out;
}

}  // namespace demonpatch
