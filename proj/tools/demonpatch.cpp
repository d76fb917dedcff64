// demonpatch command-line tool.
//
// Exit status: 0 ok, 2 I/O, 3 dimension mismatch, 4 usage, 5 malformed input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "demonpatch/affinity.hpp"
#include "demonpatch/demon.hpp"
#include "demonpatch/enhance.hpp"
#include "demonpatch/errors.hpp"
#include "demonpatch/field.hpp"
#include "demonpatch/parallel.hpp"
#include "demonpatch/png_io.hpp"
#include "demonpatch/space.hpp"
#include "demonpatch/staging.hpp"
#include "demonpatch/synth.hpp"

namespace fs = std::filesystem;
using namespace demonpatch;

namespace {

struct Globals {
  double alpha = 2.5;
  double sigma_reg = 1.0;
  int iterations = 200;
  std::string force_mode = "dual";
  double c_scale = 1.0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: DEMONPATCH_THREADS, else hardware concurrency
  std::string debug_dir;
  bool no_equalize = false;
  std::string channel;
};

AffinityConfig make_config(const Globals& g) {
  AffinityConfig cfg;
  cfg.reg.alpha = g.alpha;
  cfg.reg.sigma_reg = g.sigma_reg;
  cfg.reg.iterations = g.iterations;
  cfg.reg.force_mode = parse_force_mode(g.force_mode);
  cfg.c_scale = g.c_scale;
  cfg.pre_equalize = !g.no_equalize;
  if (!g.channel.empty()) cfg.channel_override = parse_channel(g.channel);
  cfg.validate();
  return cfg;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string mae_csv(const RegistrationResult& r) {
  std::ostringstream os;
  os << "iteration,mae\n0," << fixed6(r.initial_mae) << '\n';
  for (std::size_t i = 0; i < r.mae_history.size(); ++i) os << (i + 1) << ',' << fixed6(r.mae_history[i]) << '\n';
  return os.str();
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("cannot read '" + p.string() + "'");
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number in value list: '" + item + "'");
    }
  }
  return out;
}

std::vector<int> parse_steps(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_values(s)) {
    if (v != static_cast<int>(v)) throw UsageError("steps must be integers");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw UsageError("no steps given");
  return out;
}

// ---- register ---------------------------------------------------------------

struct RegisterArgs {
  std::string moving, fixed, out_prefix;
};

int cmd_register(const Globals& g, const RegisterArgs& a) {
  const AffinityConfig cfg = make_config(g);
  require_file(a.moving);
  require_file(a.fixed);
  const Plane m = read_png_gray(a.moving);
  const Plane s = read_png_gray(a.fixed);
  require_same_shape(m, s, "register");

  RegistrationConfig rc = cfg.reg;
  if (!g.debug_dir.empty()) rc.record_every = std::max(1, rc.iterations / 10);
  const RegistrationResult r = demon_register(m, s, rc);

  StagedOutputs staged;
  const std::string prefix = a.out_prefix;
  write_png(staged.stage(prefix + "_deformed.png"), r.deformed);
  {
    std::ofstream os(staged.stage(prefix + "_field.dmnf"), std::ios::binary);
    if (!os) throw IoError("cannot write '" + prefix + "_field.dmnf'");
    write_field(os, r.total_field);
  }
  write_text_file(staged.stage(prefix + "_mae.csv"), mae_csv(r));
  if (!g.debug_dir.empty()) {
    const fs::path dir = staged.stage(fs::path(g.debug_dir) / "register");
    fs::create_directories(dir);
    char name[64];
    for (const auto& snap : r.snapshots) {
      std::snprintf(name, sizeof name, "iter_%04d.png", snap.iteration);
      write_png(dir / name, snap.image);
    }
  }
  staged.commit();
  std::cout << "initial_mae " << fixed6(r.initial_mae) << "\nfinal_mae " << fixed6(r.final_mae()) << '\n';
  return 0;
}

// ---- affinity ---------------------------------------------------------------

struct AffinityArgs {
  std::string moving, fixed, kind = "left_eye";
};

int cmd_affinity(const Globals& g, const AffinityArgs& a) {
  const FeatureKind kind = parse_feature_kind(a.kind);
  const AffinityConfig cfg = make_config(g);
  require_file(a.moving);
  require_file(a.fixed);
  const ColorImage m = read_png(a.moving);
  const ColorImage s = read_png(a.fixed);
  std::cout << fixed6(demon_distance(m, s, kind, cfg).distance) << '\n';
  return 0;
}

// ---- space ------------------------------------------------------------------

struct SpaceBuildArgs {
  std::string out, kind, identity = "default", pose = "frontal";
  std::vector<std::string> patches;
  std::vector<std::string> sources;  // id=source_image_id
  bool pairwise = false;
};

int cmd_space_build(const Globals& g, const SpaceBuildArgs& a) {
  const FeatureKind kind = parse_feature_kind(a.kind);
  const AffinityConfig cfg = make_config(g);
  std::map<std::string, std::string> source_of;
  for (const auto& s : a.sources) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw UsageError("--source expects id=source_image_id, got '" + s + "'");
    source_of[s.substr(0, eq)] = s.substr(eq + 1);
  }
  std::vector<PatchRecord> records;
  for (const auto& p : a.patches) {
    require_file(p);
    PatchRecord r;
    r.id = fs::path(p).stem().string();
    r.image = read_png(p);
    r.kind = kind;
    r.identity = a.identity;
    r.pose = a.pose;
    auto it = source_of.find(r.id);
    r.source_image_id = it != source_of.end() ? it->second : r.id;
    records.push_back(std::move(r));
  }
  for (const auto& [id, src] : source_of) {
    const bool known = std::any_of(records.begin(), records.end(), [&](const PatchRecord& r) { return r.id == id; });
    if (!known) throw UsageError("--source names unknown patch '" + id + "'");
  }
  if (records.empty()) throw UsageError("space build needs at least one patch");
  const PatchSpace space = build_space(std::move(records), cfg, a.pairwise);
  save_space(a.out, space);
  std::cout << "records " << space.records.size() << '\n';
  return 0;
}

struct SpaceQueryArgs {
  std::string space, query;
  bool resample = false;
};

int cmd_space_query(const Globals& g, const SpaceQueryArgs& a) {
  const AffinityConfig cfg = make_config(g);
  const PatchSpace space = load_space(a.space);
  require_file(a.query);
  ColorImage q = read_png(a.query);
  if (a.resample) q = resize(q, space.width(), space.height());
  std::cout << ranking_csv(nn_query(space, q, cfg));
  return 0;
}

struct SpaceExpandArgs {
  std::string space, from, to, out, steps = "0";
};

int cmd_space_expand(const Globals& g, const SpaceExpandArgs& a) {
  const AffinityConfig cfg = make_config(g);
  const std::vector<int> steps = parse_steps(a.steps);
  const PatchSpace space = load_space(a.space);
  const auto images = expand_space(space, {a.from, a.to}, steps, cfg);
  StagedOutputs staged;
  const fs::path dir = staged.stage(a.out);
  fs::create_directories(dir);
  char name[64];
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::snprintf(name, sizeof name, "step_%02zu_%04d.png", i, steps[i]);
    write_png(dir / name, images[i]);
  }
  staged.commit();
  std::cout << "images " << images.size() << '\n';
  return 0;
}

// ---- enhance ----------------------------------------------------------------

struct EnhanceArgs {
  std::string manifest, catalog, out;
  int levels = kDefaultBlendLevels;
};

int cmd_enhance(const Globals& g, const EnhanceArgs& a) {
  const AffinityConfig cfg = make_config(g);
  require_file(a.manifest);
  require_file(a.catalog);
  const PatchManifest manifest = load_manifest(a.manifest);
  const SpaceCatalog catalog = load_catalog(a.catalog);
  EnhanceOutcome o = enhance(manifest, catalog, cfg, a.levels);

  StagedOutputs staged;
  const fs::path out = a.out;
  write_png(staged.stage(out / "composite.png"), o.result.composite);
  o.result.report.outputs["composite"] = "composite.png";
  if (!g.debug_dir.empty()) {
    const fs::path dir = staged.stage(fs::path(g.debug_dir) / "enhance");
    fs::create_directories(dir);
    write_png(dir / "brightened.png", o.result.brightened);
    for (const auto& [name, img] : o.result.intermediates) write_png(dir / (name + ".png"), img);
    std::ostringstream sel;
    for (const auto& [kind, q] : o.selection) sel << "# " << to_string(kind) << '\n' << ranking_csv(q);
    write_text_file(dir / "selection.csv", sel.str());
  }
  // timings vary run to run; keep them out of the golden report
  nlohmann::ordered_json rep = report_json(o.result.report);
  rep.erase("timing_ms");
  write_text_file(staged.stage(out / "report.json"), rep.dump(2) + "\n");
  staged.commit();
  for (const auto& f : o.result.report.features)
    std::cout << to_string(f.kind) << ' ' << f.chosen_id << ' ' << fixed6(f.registration_mae_before) << ' '
              << fixed6(f.registration_mae_after) << (f.flagged ? " flagged" : "") << '\n';
  return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string kind = "translation";
  std::optional<std::string> values;
  std::string out;
  std::optional<double> history_value;
  bool triptychs = false;
};

int cmd_bench(const Globals& g, const BenchArgs& a) {
  const AffinityConfig cfg = make_config(g);
  synth::ExperimentGrid grid;
  grid.kind = synth::parse_experiment_kind(a.kind);
  grid.values = a.values ? parse_values(*a.values) : synth::default_values(grid.kind);
  grid.base = synth::default_base(grid.kind);
  grid.reg = cfg.reg;
  grid.c_scale = cfg.c_scale;
  grid.history_value = a.history_value;
  grid.validate();
  if (a.history_value && std::find(grid.values.begin(), grid.values.end(), *a.history_value) == grid.values.end())
    throw UsageError("--history-value must be one of the grid values");

  StagedOutputs staged;
  const fs::path dir = staged.stage(a.out);
  fs::create_directories(dir);
  const synth::GridResult res = synth::run_grid(grid, a.triptychs);
  write_text_file(dir / "curve.csv", synth::curve_csv(res));
  if (!res.history.empty()) write_text_file(dir / "history.csv", synth::history_csv(res.history));
  char name[64];
  for (std::size_t i = 0; i < res.triptychs.size(); ++i) {
    std::snprintf(name, sizeof name, "triptych_%02zu.png", i);
    write_png(dir / name, synth::triptych(res.triptychs[i]));
  }
  if (grid.kind == synth::ExperimentKind::gaze && grid.values.size() >= 2) {
    const synth::GazeReport rep = synth::analyze_gaze(res);
    nlohmann::ordered_json j;
    j["mae_slope"] = rep.mae_fit.slope;
    j["mae_r2"] = rep.mae_fit.r2;
    j["breaking_point"] = rep.d_t_slopes.breaking_point;
    j["d_t_pre_slope"] = rep.d_t_slopes.pre_slope;
    j["d_t_post_slope"] = rep.d_t_slopes.post_slope;
    write_text_file(dir / "gaze_report.json", j.dump(2) + "\n");
  }
  staged.commit();
  for (const auto& r : res.records)
    std::cout << fixed6(r.value) << ' ' << fixed6(r.d_t) << ' ' << fixed6(r.success_ratio) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demon registration, affinity spaces and prior-based patch enhancement"};
  app.require_subcommand(1);
  Globals g;
  app.option_defaults()->always_capture_default();
  app.add_option("--alpha", g.alpha, "force stabilization weight");
  app.add_option("--sigma-reg", g.sigma_reg, "Gaussian regularization sigma (px)");
  app.add_option("--iterations", g.iterations, "registration iterations T");
  app.add_option("--force-mode", g.force_mode, "basic | stabilized | dual");
  app.add_option("--c-scale", g.c_scale, "affinity scale C");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads (default: DEMONPATCH_THREADS or all cores)");
  app.add_option("--debug-dir", g.debug_dir, "dump stage intermediates here");
  app.add_flag("--no-equalize", g.no_equalize, "skip histogram equalization before affinity");
  app.add_option("--channel", g.channel, "override the feature channel: hue | saturation | value");

  RegisterArgs reg;
  auto* c_reg = app.add_subcommand("register", "register a moving PNG onto a static PNG");
  c_reg->add_option("moving", reg.moving)->required();
  c_reg->add_option("static", reg.fixed)->required();
  c_reg->add_option("out_prefix", reg.out_prefix)->required();

  AffinityArgs aff;
  auto* c_aff = app.add_subcommand("affinity", "print the Demon distance between two patches");
  c_aff->add_option("moving", aff.moving)->required();
  c_aff->add_option("static", aff.fixed)->required();
  c_aff->add_option("--kind", aff.kind, "left_eye | right_eye | mouth | head");

  auto* c_space = app.add_subcommand("space", "affinity space tools");
  c_space->require_subcommand(1);
  SpaceBuildArgs sb;
  auto* c_sb = c_space->add_subcommand("build", "build a space directory from patch PNGs");
  c_sb->add_option("out", sb.out)->required();
  c_sb->add_option("patches", sb.patches)->required();
  c_sb->add_option("--kind", sb.kind)->required();
  c_sb->add_option("--identity", sb.identity);
  c_sb->add_option("--pose", sb.pose);
  c_sb->add_option("--source", sb.sources, "patch_id=source_image_id");
  c_sb->add_flag("--pairwise", sb.pairwise, "compute the pairwise distance matrix");
  SpaceQueryArgs sq;
  auto* c_sq = c_space->add_subcommand("query", "rank a space against a query patch");
  c_sq->add_option("space", sq.space)->required();
  c_sq->add_option("query", sq.query)->required();
  c_sq->add_flag("--resample", sq.resample, "resample the query to the canonical size");
  SpaceExpandArgs se;
  auto* c_se = c_space->add_subcommand("expand", "write intermediate images between two records");
  c_se->add_option("space", se.space)->required();
  c_se->add_option("from", se.from)->required();
  c_se->add_option("to", se.to)->required();
  c_se->add_option("out", se.out)->required();
  c_se->add_option("--steps", se.steps, "comma-separated iteration counts");

  EnhanceArgs en;
  auto* c_en = app.add_subcommand("enhance", "select, infer and embed high-quality features");
  c_en->add_option("manifest", en.manifest)->required();
  c_en->add_option("catalog", en.catalog)->required();
  c_en->add_option("out", en.out)->required();
  c_en->add_option("--levels", en.levels, "blend pyramid levels");

  BenchArgs be;
  std::string values_arg, history_arg;
  auto* c_be = app.add_subcommand("bench", "run a synthetic breaking-point experiment");
  c_be->add_option("--kind", be.kind, "translation | rotation | scaling | gaze");
  auto* o_values = c_be->add_option("--values", values_arg, "comma-separated grid values");
  auto* o_hist = c_be->add_option("--history-value", history_arg, "grid value whose MAE history is written");
  c_be->add_option("out", be.out)->required();
  c_be->add_flag("--triptychs", be.triptychs, "write source|deformed|target strips");

  for (auto* sub : {c_reg, c_aff, c_space, c_en, c_be}) sub->fallthrough();
  for (auto* sub : {c_sb, c_sq, c_se}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    const int n = g.threads > 0 ? g.threads
                                : parallel::threads_from_env(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    if (g.threads < 0) throw UsageError("--threads must be >= 1");
    parallel::set_threads(n);

    if (c_reg->parsed()) return cmd_register(g, reg);
    if (c_aff->parsed()) return cmd_affinity(g, aff);
    if (c_sb->parsed()) return cmd_space_build(g, sb);
    if (c_sq->parsed()) return cmd_space_query(g, sq);
    if (c_se->parsed()) return cmd_space_expand(g, se);
    if (c_en->parsed()) return cmd_enhance(g, en);
    if (c_be->parsed()) {
      if (o_values->count() > 0) be.values = values_arg;
      if (o_hist->count() > 0) {
        const auto hv = parse_values(history_arg);
        if (hv.size() != 1) throw UsageError("--history-value takes one number");
        be.history_value = hv[0];
      }
      return cmd_bench(g, be);
    }
    throw UsageError("no command given");
  } catch (const Error& e) {
    std::cerr << "demonpatch: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "demonpatch: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::io);
  } catch (const std::exception& e) {
    std::cerr << "demonpatch: " << e.what() << '\n';
    return 1;
  }
}
