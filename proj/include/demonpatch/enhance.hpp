#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "demonpatch/affinity.hpp"
#include "demonpatch/filter.hpp"
#include "demonpatch/histogram.hpp"
#include "demonpatch/png_io.hpp"
#include "demonpatch/pyramid.hpp"
#include "demonpatch/space.hpp"

namespace demonpatch {

struct ManifestEntry {
  FeatureKind kind = FeatureKind::left_eye;
  Rect bbox;
  std::optional<Plane> mask;  // bbox-sized or image-sized weights
};

// Semantic regions of one photo: the input to enhance, or a high-quality
// prior photo referenced by a catalog.
struct PatchManifest {
  std::filesystem::path image_path;
  ColorImage image;
  std::vector<ManifestEntry> entries;
  std::string identity;
  std::string pose;

  const ManifestEntry* entry(FeatureKind k) const {
    for (const auto& e : entries)
      if (e.kind == k) return &e;
    return nullptr;
  }

  void validate() const {
    std::array<int, 4> count{};
    for (const auto& e : entries) {
      if (++count[static_cast<std::size_t>(e.kind)] > 1)
        throw UsageError("manifest lists " + std::string(to_string(e.kind)) + " more than once");
      if (!inside(e.bbox, image.width(), image.height()))
        throw UsageError("manifest " + std::string(to_string(e.kind)) + " bbox lies outside the " +
                         std::to_string(image.width()) + "x" + std::to_string(image.height()) + " image");
      if (e.mask && !(e.mask->width() == e.bbox.w && e.mask->height() == e.bbox.h) &&
          !(e.mask->width() == image.width() && e.mask->height() == image.height()))
        throw DimensionError("manifest " + std::string(to_string(e.kind)) +
                             " mask must match the bbox or the image size");
    }
  }

  void require(FeatureKind k) const {
    if (entry(k) == nullptr) throw UsageError("manifest has no " + std::string(to_string(k)) + " entry");
  }
};

using SpaceKey = std::tuple<std::string, std::string, FeatureKind>;  // identity, pose, kind

struct SpaceCatalog {
  std::map<SpaceKey, PatchSpace> spaces;
  std::map<std::string, PatchManifest> source_images;

  const PatchSpace& space(const std::string& identity, const std::string& pose, FeatureKind k) const {
    auto it = spaces.find({identity, pose, k});
    if (it == spaces.end())
      throw UsageError("catalog has no " + std::string(to_string(k)) + " space for identity '" + identity +
                       "', pose '" + pose + "'");
    return it->second;
  }

  const PatchManifest& source(const std::string& id) const {
    auto it = source_images.find(id);
    if (it == source_images.end()) throw UsageError("source image '" + id + "' is not in the catalog");
    return it->second;
  }

  void validate() const {
    for (const auto& [key, sp] : spaces)
      for (const auto& r : sp.records)
        if (!source_images.count(r.source_image_id))
          throw UsageError("record '" + r.id + "' links to unknown source image '" + r.source_image_id + "'");
  }
};

struct FeatureReport {
  FeatureKind kind{};
  std::string chosen_id;
  std::string source_image_id;
  std::optional<double> distance;  // only for kinds chosen by search
  double registration_mae_before = 0;
  double registration_mae_after = 0;
  bool flagged = false;  // registration ended further from the input than it started
};

struct EnhanceReport {
  std::vector<FeatureReport> features;
  std::string background_source_id;
  std::map<std::string, std::string> outputs;
  std::map<std::string, double> timing_ms;
};

struct CorrelatedRegions {
  std::map<FeatureKind, PatchRecord> regions;
  std::string background_source_id;
};

inline constexpr int kDefaultBlendLevels = 4;
inline constexpr double kFeatherFraction = 0.10;

// Crops each query feature, resamples it to its space's canonical size and
// ranks the space against it.
inline std::map<FeatureKind, QueryResult> select_examples(const PatchManifest& manifest, const SpaceCatalog& catalog,
                                                          const AffinityConfig& cfg) {
  manifest.validate();
  manifest.require(FeatureKind::left_eye);
  manifest.require(FeatureKind::mouth);
  const FeatureKind searched[] = {FeatureKind::left_eye, FeatureKind::mouth};
  std::array<const PatchSpace*, 2> spaces{};
  for (std::size_t i = 0; i < 2; ++i) spaces[i] = &catalog.space(manifest.identity, manifest.pose, searched[i]);

  std::array<QueryResult, 2> results;
  parallel::for_each_index(0, 2, [&](std::size_t i) {
    const PatchSpace& sp = *spaces[i];
    const ColorImage query = resize(crop(manifest.image, manifest.entry(searched[i])->bbox), sp.width(), sp.height());
    results[i] = nn_query(sp, query, cfg);
  });
  return {{searched[0], std::move(results[0])}, {searched[1], std::move(results[1])}};
}

// Right eye comes from the photo that supplied the left eye; head, skin and
// background illumination come from the photo that supplied the mouth.
inline CorrelatedRegions infer_correlated(const std::map<FeatureKind, QueryResult>& selection,
                                          const SpaceCatalog& catalog) {
  auto le = selection.find(FeatureKind::left_eye);
  auto mo = selection.find(FeatureKind::mouth);
  if (le == selection.end()) throw UsageError("selection has no left_eye match");
  if (mo == selection.end()) throw UsageError("selection has no mouth match");

  CorrelatedRegions out;
  out.regions[FeatureKind::left_eye] = le->second.best;
  out.regions[FeatureKind::mouth] = mo->second.best;

  auto cut = [&](const PatchManifest& src, const std::string& src_id, FeatureKind k,
                 const PatchRecord& like) -> std::optional<PatchRecord> {
    const ManifestEntry* e = src.entry(k);
    if (e == nullptr) return std::nullopt;
    PatchRecord r;
    r.id = src_id + "." + std::string(to_string(k));
    r.image = crop(src.image, e->bbox);
    r.kind = k;
    r.identity = like.identity;
    r.pose = like.pose;
    r.source_image_id = src_id;
    return r;
  };

  const std::string& eye_src = le->second.best.source_image_id;
  if (auto r = cut(catalog.source(eye_src), eye_src, FeatureKind::right_eye, le->second.best))
    out.regions[FeatureKind::right_eye] = std::move(*r);

  const std::string& mouth_src = mo->second.best.source_image_id;
  if (auto r = cut(catalog.source(mouth_src), mouth_src, FeatureKind::head, mo->second.best))
    out.regions[FeatureKind::head] = std::move(*r);
  out.background_source_id = mouth_src;
  return out;
}

// Weight ramps linearly from the bbox border to 1 over 10% of its width.
inline Plane feathered_mask(int width, int height, const Rect& box) {
  Plane m(width, height, 0.0);
  const double ramp = std::max(1.0, kFeatherFraction * box.w);
  for (int y = box.y; y < box.y + box.h; ++y)
    for (int x = box.x; x < box.x + box.w; ++x) {
      const double d = std::min({x - box.x + 0.5, box.x + box.w - x - 0.5, y - box.y + 0.5, box.y + box.h - y - 0.5});
      m(x, y) = std::min(1.0, d / ramp);
    }
  return m;
}

inline Plane region_mask(const ColorImage& img, const ManifestEntry& e) {
  if (!e.mask) return feathered_mask(img.width(), img.height(), e.bbox);
  if (e.mask->width() == img.width() && e.mask->height() == img.height()) return clamp01(*e.mask);
  Plane m(img.width(), img.height(), 0.0);
  paste(m, clamp01(*e.mask), e.bbox.x, e.bbox.y);
  return m;
}

inline ColorImage transfer_value_channel(const ColorImage& img, const ColorImage& reference) {
  HsvImage hsv = rgb_to_hsv(img);
  hsv.v = histogram_match(hsv.v, rgb_to_hsv(reference).v);
  return hsv_to_rgb(hsv);
}

// Uniform-scale similarity taking the source bbox onto the target bbox,
// applied to the whole source photo and sampled on the target lattice.
inline ColorImage align_by_bbox(const ColorImage& source, const Rect& from, const Rect& to, int width, int height) {
  const double scale = std::sqrt((static_cast<double>(to.w) / from.w) * (static_cast<double>(to.h) / from.h));
  const double fcx = from.x + 0.5 * from.w - 0.5, fcy = from.y + 0.5 * from.h - 0.5;
  const double tcx = to.x + 0.5 * to.w - 0.5, tcy = to.y + 0.5 * to.h - 0.5;
  ColorImage out(width, height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out[c](x, y) = sample_bilinear(source[c], fcx + (x - tcx) / scale, fcy + (y - tcy) / scale);
  return out;
}

struct EmbeddedFeature {
  ColorImage deformed;  // bbox-sized, high-quality content fitted to the input
  RegistrationResult registration;
};

// Fits a high-quality feature to the input feature: the input crop is first
// brought to the feature's illumination, then the feature is registered
// onto it as the moving image.
inline EmbeddedFeature fit_feature(const ColorImage& input_crop, const ColorImage& hq, FeatureKind kind,
                                   const AffinityConfig& cfg) {
  const ColorImage hq_sized = resize(hq, input_crop.width(), input_crop.height());
  const ColorImage adjusted(histogram_match(input_crop[0], hq_sized[0]), histogram_match(input_crop[1], hq_sized[1]),
                            histogram_match(input_crop[2], hq_sized[2]));
  // The histogram match above is the illumination adjustment here.
  AffinityConfig fit_cfg = cfg;
  fit_cfg.pre_equalize = false;
  const ChannelPair ch = prepare_channels(hq_sized, adjusted, kind, fit_cfg);
  EmbeddedFeature f;
  f.registration = demon_register(ch.moving, ch.fixed, cfg.reg);
  f.deformed = warp(hq_sized, f.registration.total_field);
  return f;
}

struct EmbedResult {
  ColorImage composite;
  ColorImage brightened;
  EnhanceReport report;
  std::map<std::string, ColorImage> intermediates;  // for debug dumps
};

inline constexpr FeatureKind kCompositeOrder[] = {FeatureKind::head, FeatureKind::left_eye, FeatureKind::right_eye,
                                                  FeatureKind::mouth};

inline EmbedResult embed(const PatchManifest& manifest, const CorrelatedRegions& regions, const SpaceCatalog& catalog,
                         const AffinityConfig& cfg, int blend_levels = kDefaultBlendLevels) {
  using clock = std::chrono::steady_clock;
  const auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  manifest.validate();
  cfg.validate();
  const ColorImage& input = manifest.image;
  check_pyramid_levels(input.width(), input.height(), blend_levels);

  EmbedResult out;
  EnhanceReport& rep = out.report;
  rep.background_source_id = regions.background_source_id;

  auto t0 = clock::now();
  const PatchManifest& background = catalog.source(regions.background_source_id);
  out.brightened = transfer_value_channel(input, background.image);
  rep.timing_ms["illumination"] = ms_since(t0);

  // head/skin alignment
  t0 = clock::now();
  std::optional<ColorImage> head_aligned;
  if (auto it = regions.regions.find(FeatureKind::head); it != regions.regions.end() && manifest.entry(FeatureKind::head)) {
    const PatchManifest& src = catalog.source(it->second.source_image_id);
    const ManifestEntry* from = src.entry(FeatureKind::head);
    if (from == nullptr) throw UsageError("head source '" + it->second.source_image_id + "' has no head entry");
    head_aligned = align_by_bbox(src.image, from->bbox, manifest.entry(FeatureKind::head)->bbox, input.width(),
                                 input.height());
    FeatureReport fr;
    fr.kind = FeatureKind::head;
    fr.chosen_id = it->second.id;
    fr.source_image_id = it->second.source_image_id;
    rep.features.push_back(fr);
    out.intermediates["head_aligned"] = *head_aligned;
  }
  rep.timing_ms["head_alignment"] = ms_since(t0);

  // feature registration, concurrently per kind
  t0 = clock::now();
  std::vector<FeatureKind> kinds;
  for (FeatureKind k : {FeatureKind::left_eye, FeatureKind::right_eye, FeatureKind::mouth})
    if (regions.regions.count(k) && manifest.entry(k)) kinds.push_back(k);
  std::vector<EmbeddedFeature> fitted(kinds.size());
  parallel::for_each_index(0, kinds.size(), [&](std::size_t i) {
    const ManifestEntry* e = manifest.entry(kinds[i]);
    fitted[i] = fit_feature(crop(out.brightened, e->bbox), regions.regions.at(kinds[i]).image, kinds[i], cfg);
  });
  rep.timing_ms["feature_registration"] = ms_since(t0);

  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const PatchRecord& rec = regions.regions.at(kinds[i]);
    FeatureReport fr;
    fr.kind = kinds[i];
    fr.chosen_id = rec.id;
    fr.source_image_id = rec.source_image_id;
    fr.registration_mae_before = fitted[i].registration.initial_mae;
    fr.registration_mae_after = fitted[i].registration.final_mae();
    fr.flagged = fr.registration_mae_after > fr.registration_mae_before;
    rep.features.push_back(fr);
    out.intermediates[std::string(to_string(kinds[i])) + "_deformed"] = fitted[i].deformed;
  }

  // blending in fixed order
  t0 = clock::now();
  ColorImage composite = out.brightened;
  for (FeatureKind k : kCompositeOrder) {
    const ManifestEntry* e = manifest.entry(k);
    if (e == nullptr) continue;
    if (k == FeatureKind::head) {
      if (!head_aligned) continue;
      composite = blend_multiresolution(composite, *head_aligned, BlendMask{region_mask(input, *e)}, blend_levels);
      continue;
    }
    auto it = std::find(kinds.begin(), kinds.end(), k);
    if (it == kinds.end()) continue;
    ColorImage insert = composite;
    paste(insert, fitted[static_cast<std::size_t>(it - kinds.begin())].deformed, e->bbox.x, e->bbox.y);
    composite = blend_multiresolution(composite, insert, BlendMask{region_mask(input, *e)}, blend_levels);
  }
  rep.timing_ms["blending"] = ms_since(t0);
  out.composite = std::move(composite);
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline Rect parse_bbox(const nlohmann::json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 4) throw FormatError("bbox must be [x, y, w, h]");
  return {v[0], v[1], v[2], v[3]};
}

// Paths inside the manifest are relative to the manifest's directory.
inline PatchManifest load_manifest(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  PatchManifest m;
  std::vector<std::pair<std::size_t, std::filesystem::path>> masks;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto base = path.parent_path();
    m.image_path = base / j.at("input_image").get<std::string>();
    m.identity = j.value("identity", std::string());
    m.pose = j.value("pose", std::string());
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      try {
        e.kind = parse_feature_kind(je.at("kind").get<std::string>());
      } catch (const UsageError& err) {
        throw FormatError(err.what());
      }
      e.bbox = parse_bbox(je.at("bbox"));
      if (je.contains("mask") && !je["mask"].is_null()) masks.emplace_back(m.entries.size(), base / je["mask"].get<std::string>());
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
  }
  m.image = read_png(m.image_path);
  for (const auto& [idx, mp] : masks) m.entries[idx].mask = read_png_gray(mp);
  m.validate();
  return m;
}

inline nlohmann::ordered_json manifest_json(const PatchManifest& m, const std::string& image_ref) {
  nlohmann::ordered_json j;
  j["input_image"] = image_ref;
  j["identity"] = m.identity;
  j["pose"] = m.pose;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"kind", std::string(to_string(e.kind))}, {"bbox", {e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h}}});
  return j;
}

// {"spaces": [{"identity","pose","kind","path"}], "source_images": {id: manifest path}}
inline SpaceCatalog load_catalog(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  SpaceCatalog cat;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto base = path.parent_path();
    for (const auto& [id, mp] : j.at("source_images").items())
      cat.source_images.emplace(id, load_manifest(base / mp.get<std::string>()));
    for (const auto& js : j.at("spaces")) {
      PatchSpace sp = load_space(base / js.at("path").get<std::string>());
      FeatureKind kind;
      try {
        kind = parse_feature_kind(js.at("kind").get<std::string>());
      } catch (const UsageError& err) {
        throw FormatError(err.what());
      }
      const auto identity = js.at("identity").get<std::string>();
      const auto pose = js.at("pose").get<std::string>();
      if (sp.kind() != kind || sp.identity() != identity || sp.pose() != pose)
        throw FormatError("catalog entry for '" + js.at("path").get<std::string>() + "' disagrees with its space manifest");
      cat.spaces.emplace(SpaceKey{identity, pose, kind}, std::move(sp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed catalog '" + path.string() + "': " + e.what());
  }
  cat.validate();
  return cat;
}

inline nlohmann::ordered_json report_json(const EnhanceReport& r) {
  nlohmann::ordered_json j;
  j["background_source_id"] = r.background_source_id;
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : r.features) {
    nlohmann::ordered_json jf;
    jf["kind"] = std::string(to_string(f.kind));
    jf["chosen_id"] = f.chosen_id;
    jf["source_image_id"] = f.source_image_id;
    jf["distance"] = f.distance ? nlohmann::ordered_json(*f.distance) : nlohmann::ordered_json(nullptr);
    jf["registration_mae_before"] = f.registration_mae_before;
    jf["registration_mae_after"] = f.registration_mae_after;
    jf["flagged"] = f.flagged;
    j["features"].push_back(jf);
  }
  j["outputs"] = r.outputs;
  j["timing_ms"] = r.timing_ms;
  return j;
}

struct EnhanceOutcome {
  std::map<FeatureKind, QueryResult> selection;
  CorrelatedRegions regions;
  EmbedResult result;
};

// select -> infer -> embed; errors carry the failing stage's name.
inline EnhanceOutcome enhance(const PatchManifest& manifest, const SpaceCatalog& catalog, const AffinityConfig& cfg,
                              int blend_levels = kDefaultBlendLevels) {
  auto staged = [](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(stage) + ": " + e.what());
    }
  };
  EnhanceOutcome o;
  o.selection = staged("select", [&] { return select_examples(manifest, catalog, cfg); });
  o.regions = staged("infer", [&] { return infer_correlated(o.selection, catalog); });
  o.result = staged("embed", [&] { return embed(manifest, o.regions, catalog, cfg, blend_levels); });
  for (auto& f : o.result.report.features)
    if (auto it = o.selection.find(f.kind); it != o.selection.end()) f.distance = it->second.distance;
  return o;
}

}  // namespace demonpatch
