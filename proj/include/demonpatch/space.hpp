#pragma once

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "demonpatch/affinity.hpp"
#include "demonpatch/png_io.hpp"
#include "demonpatch/staging.hpp"

namespace demonpatch {

struct PatchRecord {
  std::string id;
  ColorImage image;
  FeatureKind kind = FeatureKind::left_eye;
  std::string identity;
  std::string pose;
  std::string source_image_id;
};

// Homogeneous collection of high-quality patches of one feature, one
// identity and one pose. pairwise[i][j] is D_T(records[i] -> records[j]).
struct PatchSpace {
  std::vector<PatchRecord> records;
  std::optional<std::vector<std::vector<double>>> pairwise;

  FeatureKind kind() const { return records.front().kind; }
  const std::string& identity() const { return records.front().identity; }
  const std::string& pose() const { return records.front().pose; }
  int width() const { return records.front().image.width(); }
  int height() const { return records.front().image.height(); }

  const PatchRecord* find(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }
};

struct RankedId {
  std::string id;
  double distance = 0.0;
};

struct QueryResult {
  PatchRecord best;
  double distance = 0.0;
  std::vector<RankedId> ranking;  // ascending distance, ties by id
};

inline bool valid_record_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

inline PatchSpace build_space(std::vector<PatchRecord> patches, const AffinityConfig& cfg, bool with_pairwise) {
  if (patches.empty()) throw UsageError("cannot build an empty patch space");
  cfg.validate();
  const PatchRecord& first = patches.front();
  std::map<std::string, int> seen;
  for (const auto& r : patches) {
    if (!valid_record_id(r.id)) throw UsageError("invalid record id '" + r.id + "'");
    if (seen[r.id]++ > 0) throw UsageError("duplicate record id '" + r.id + "'");
    if (r.kind != first.kind)
      throw UsageError("record '" + r.id + "' has kind " + std::string(to_string(r.kind)) + ", space is " +
                       std::string(to_string(first.kind)));
    if (r.identity != first.identity)
      throw UsageError("record '" + r.id + "' has identity '" + r.identity + "', space is '" + first.identity + "'");
    if (r.pose != first.pose)
      throw UsageError("record '" + r.id + "' has pose '" + r.pose + "', space is '" + first.pose + "'");
    if (!r.image.same_shape(first.image))
      throw DimensionError("record '" + r.id + "' differs from the canonical patch size");
  }

  PatchSpace space;
  space.records = std::move(patches);
  if (with_pairwise) {
    const std::size_t n = space.records.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    parallel::for_each_index(0, n * n, [&](std::size_t k) {
      const std::size_t i = k / n, j = k % n;
      if (i == j) return;
      d[i][j] = demon_distance(space.records[i].image, space.records[j].image, space.kind(), cfg).distance;
    });
    space.pairwise = std::move(d);
  }
  return space;
}

// Each record is the moving image registered onto the query.
inline QueryResult nn_query(const PatchSpace& space, const ColorImage& query, const AffinityConfig& cfg) {
  if (space.records.empty()) throw UsageError("query on an empty patch space");
  cfg.validate();
  if (query.width() != space.width() || query.height() != space.height())
    throw DimensionError("query is " + std::to_string(query.width()) + "x" + std::to_string(query.height()) +
                         ", space patches are " + std::to_string(space.width()) + "x" +
                         std::to_string(space.height()));
  std::vector<RankedId> ranking(space.records.size());
  parallel::for_each_index(0, ranking.size(), [&](std::size_t i) {
    const auto& r = space.records[i];
    ranking[i] = {r.id, demon_distance(r.image, query, space.kind(), cfg).distance};
  });
  std::sort(ranking.begin(), ranking.end(), [](const RankedId& a, const RankedId& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  QueryResult q;
  q.best = *space.find(ranking.front().id);
  q.distance = ranking.front().distance;
  q.ranking = std::move(ranking);
  return q;
}

// Deformation path from `from` towards `to`, applied to the full color
// patch: the field is estimated on the kind's channel and every HSV plane
// of the source patch is warped with it.
inline std::vector<ColorImage> expand_space(const PatchSpace& space, const std::pair<std::string, std::string>& pair,
                                            const std::vector<int>& steps, const AffinityConfig& cfg) {
  cfg.validate();
  const PatchRecord* a = space.find(pair.first);
  const PatchRecord* b = space.find(pair.second);
  if (a == nullptr) throw UsageError("unknown record id '" + pair.first + "'");
  if (b == nullptr) throw UsageError("unknown record id '" + pair.second + "'");
  if (!std::is_sorted(steps.begin(), steps.end())) throw UsageError("expansion steps must be sorted");
  for (int st : steps)
    if (st < 0 || st > cfg.reg.iterations)
      throw UsageError("expansion step " + std::to_string(st) + " outside [0, " +
                       std::to_string(cfg.reg.iterations) + "]");

  std::vector<ColorImage> out;
  if (steps.empty()) return out;
  std::size_t next = 0;
  while (next < steps.size() && steps[next] == 0) {
    out.push_back(a->image);
    ++next;
  }
  if (next == steps.size()) return out;

  const ChannelPair ch = prepare_channels(a->image, b->image, space.kind(), cfg);
  const HsvImage hsv = rgb_to_hsv(a->image);
  RegistrationConfig run = cfg.reg;
  run.iterations = steps.back();
  run.record_every = 0;
  demon_register(ch.moving, ch.fixed, run, [&](int it, const Plane&, const DisplacementField& total) {
    while (next < steps.size() && steps[next] == it) {
      HsvImage warped{warp(hsv.h, total), warp(hsv.s, total), warp(hsv.v, total)};
      out.push_back(hsv_to_rgb(warped));
      ++next;
    }
  });
  return out;
}

// ---- persistence ---------------------------------------------------------

inline constexpr const char* kSpaceManifestName = "manifest.json";
inline constexpr const char* kSpacePairwiseName = "pairwise.csv";

inline std::string pairwise_csv(const PatchSpace& space) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << "from_id,to_id,distance\n";
  if (!space.pairwise) return os.str();
  const auto& d = *space.pairwise;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      os << space.records[i].id << ',' << space.records[j].id << ',' << d[i][j] << '\n';
  return os.str();
}

inline std::string ranking_csv(const QueryResult& q) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << "rank,id,distance\n";
  for (std::size_t i = 0; i < q.ranking.size(); ++i)
    os << (i + 1) << ',' << q.ranking[i].id << ',' << q.ranking[i].distance << '\n';
  return os.str();
}

// Writes manifest.json, patches/<id>.png and, when present, pairwise.csv
// into `dir` (which must not exist yet or is replaced as a whole).
inline void write_space_contents(const std::filesystem::path& dir, const PatchSpace& space) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "patches");
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(space.kind()));
  j["identity"] = space.identity();
  j["pose"] = space.pose();
  j["canonical_size"] = {space.width(), space.height()};
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : space.records) {
    j["records"].push_back({{"id", r.id},
                            {"source_image_id", r.source_image_id},
                            {"file", "patches/" + r.id + ".png"}});
    write_png(dir / "patches" / (r.id + ".png"), r.image);
  }
  j["pairwise"] = space.pairwise ? nlohmann::ordered_json(kSpacePairwiseName) : nlohmann::ordered_json(nullptr);
  write_text_file(dir / kSpaceManifestName, j.dump(2) + "\n");
  if (space.pairwise) write_text_file(dir / kSpacePairwiseName, pairwise_csv(space));
}

inline void save_space(const std::filesystem::path& dir, const PatchSpace& space) {
  StagedOutputs staged;
  write_space_contents(staged.stage(dir), space);
  staged.commit();
}

inline PatchSpace load_space(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest = dir / kSpaceManifestName;
  if (!fs::is_regular_file(manifest))
    throw FormatError("space directory '" + dir.string() + "' has no " + kSpaceManifestName);
  PatchSpace space;
  try {
    const auto j = nlohmann::json::parse(read_text_file(manifest));
    const FeatureKind kind = parse_feature_kind(j.at("kind").get<std::string>());
    const auto identity = j.at("identity").get<std::string>();
    const auto pose = j.at("pose").get<std::string>();
    const auto size = j.at("canonical_size").get<std::vector<int>>();
    if (size.size() != 2) throw FormatError("canonical_size must be [width, height]");
    for (const auto& jr : j.at("records")) {
      PatchRecord r;
      r.id = jr.at("id").get<std::string>();
      if (!valid_record_id(r.id)) throw FormatError("invalid record id '" + r.id + "'");
      r.source_image_id = jr.value("source_image_id", std::string());
      r.kind = kind;
      r.identity = identity;
      r.pose = pose;
      const fs::path file = dir / jr.at("file").get<std::string>();
      try {
        r.image = read_png(file);
      } catch (const IoError& e) {
        throw FormatError(std::string("space patch unreadable: ") + e.what());
      }
      if (r.image.width() != size[0] || r.image.height() != size[1])
        throw FormatError("patch '" + r.id + "' does not match the canonical size");
      space.records.push_back(std::move(r));
    }
    if (space.records.empty()) throw FormatError("space has no records");

    if (j.contains("pairwise") && j["pairwise"].is_string()) {
      const std::string text = read_text_file(dir / j["pairwise"].get<std::string>());
      std::map<std::string, std::size_t> index;
      for (std::size_t i = 0; i < space.records.size(); ++i) index[space.records[i].id] = i;
      std::vector<std::vector<double>> d(space.records.size(), std::vector<double>(space.records.size(), 0.0));
      std::istringstream is(text);
      std::string line;
      std::getline(is, line);  // header
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string from, to, dist;
        if (!std::getline(ls, from, ',') || !std::getline(ls, to, ',') || !std::getline(ls, dist))
          throw FormatError("malformed pairwise row '" + line + "'");
        if (!index.count(from) || !index.count(to)) throw FormatError("pairwise row names unknown id");
        d[index[from]][index[to]] = std::stod(dist);
      }
      space.pairwise = std::move(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed space manifest '" + manifest.string() + "': " + e.what());
  } catch (const UsageError& e) {
    throw FormatError(std::string("malformed space manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed number in pairwise.csv");
  }
  return space;
}

}  // namespace demonpatch
