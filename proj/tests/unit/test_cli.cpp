#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "demonpatch/png_io.hpp"
#include "demonpatch/synth.hpp"
#include "face_fixture.hpp"
#include "families.hpp"
#include "oracles.hpp"

using namespace demonpatch;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

class Cli : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("dp_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    auto disk = [](double cx) {
      auto spec = synth::default_base(synth::ExperimentKind::translation);
      std::get<synth::Disk>(spec.shape).cx = cx;
      return quantize8(synth::render(spec));
    };
    write_png(root / "d32.png", disk(32));
    write_png(root / "d37.png", disk(37));
    write_png(root / "d44.png", disk(44));
    write_png(root / "small.png", Plane(16, 16, 0.5));
    const auto fam = fixture::blob_family(4);
    for (const auto& r : fam) write_png(root / (r.id + ".png"), r.image);
    std::mt19937_64 rng(5);
    write_png(root / "r2_degraded.png", quantize8(synth::degrade(fam[2].image, synth::Degradation{}, rng)));
  }

  static void TearDownTestSuite() { fs::remove_all(root); }

  static CliRun run(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const fs::path out = root / ("stdout_" + std::to_string(counter));
    const fs::path err = root / ("stderr_" + std::to_string(counter++));
    const std::string cmd = env + " \"" DEMONPATCH_CLI "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  static std::string p(const std::string& name) { return "\"" + (root / name).string() + "\""; }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
  }

  static double field_after(const std::string& text, const std::string& key) {
    for (const auto& l : lines(text))
      if (l.rfind(key + " ", 0) == 0) return std::stod(l.substr(key.size() + 1));
    throw std::runtime_error("missing " + key);
  }

  static bool anything_named(const std::string& stem) {
    for (const auto& e : fs::directory_iterator(root))
      if (e.path().filename().string().rfind(stem, 0) == 0) return true;
    return false;
  }
};

fs::path Cli::root;

}  // namespace

TEST_F(Cli, RegisterIdenticalGivesZeroHistory) {
  const auto r = run("--iterations 20 register " + p("d32.png") + " " + p("d32.png") + " " + p("same"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(read_text_file(root / "same_mae.csv"));
  ASSERT_EQ(csv.size(), 22u);
  EXPECT_EQ(csv[0], "iteration,mae");
  for (std::size_t i = 1; i < csv.size(); ++i) EXPECT_EQ(csv[i], std::to_string(i - 1) + ",0.000000");
  std::ifstream f(root / "same_field.dmnf", std::ios::binary);
  const auto field = read_field(f);
  EXPECT_TRUE(field.is_zero());
  EXPECT_EQ(read_png_gray(root / "same_deformed.png"), read_png_gray(root / "d32.png"));
}

TEST_F(Cli, RegisterTranslatedDisk) {
  const auto r = run("register " + p("d32.png") + " " + p("d37.png") + " " + p("shift"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(field_after(r.out, "final_mae"), 0.1 * field_after(r.out, "initial_mae"));
  EXPECT_EQ(lines(read_text_file(root / "shift_mae.csv")).size(), 202u);
}

TEST_F(Cli, RegisterErrorsLeaveNothing) {
  auto r = run("register " + p("d32.png") + " " + p("small.png") + " " + p("bad_dim"));
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(anything_named("bad_dim"));
  r = run("register " + p("d32.png") + " " + p("missing.png") + " " + p("bad_io"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(anything_named("bad_io"));
  r = run("--alpha -1 register " + p("d32.png") + " " + p("d32.png") + " " + p("bad_cfg"));
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(anything_named("bad_cfg"));
  r = run("--force-mode turbo register " + p("d32.png") + " " + p("d32.png") + " " + p("bad_mode"));
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(run("register " + p("d32.png")).code, 4);
  EXPECT_EQ(run("").code, 4);
}

TEST_F(Cli, RegisterDebugSnapshots) {
  const auto r = run("--iterations 20 --debug-dir " + p("dbg") + " register " + p("d32.png") + " " + p("d37.png") +
                     " " + p("snap"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "dbg" / "register" / "iter_0002.png"));
  EXPECT_TRUE(fs::exists(root / "dbg" / "register" / "iter_0020.png"));
}

TEST_F(Cli, AffinityOrderingAndErrors) {
  auto r = run("affinity " + p("d32.png") + " " + p("d32.png") + " --kind head");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.000000\n");
  const auto near = run("affinity " + p("d32.png") + " " + p("d37.png") + " --kind head");
  const auto far = run("affinity " + p("d32.png") + " " + p("d44.png") + " --kind head");
  ASSERT_EQ(near.code, 0);
  ASSERT_EQ(far.code, 0);
  EXPECT_LT(std::stod(near.out), std::stod(far.out));
  EXPECT_EQ(run("affinity " + p("d32.png") + " " + p("d37.png") + " --kind nose").code, 4);
  EXPECT_EQ(run("affinity " + p("d32.png") + " " + p("small.png")).code, 3);
  EXPECT_EQ(run("--channel luma affinity " + p("d32.png") + " " + p("d32.png")).code, 4);
}

TEST_F(Cli, SpaceBuildQueryExpand) {
  auto r = run("space build " + p("space1") + " " + p("r0.png") + " --kind left_eye");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("space query " + p("space1") + " " + p("r0.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "rank,id,distance\n1,r0,0.000000\n");

  r = run("space build " + p("space4") + " " + p("r0.png") + " " + p("r1.png") + " " + p("r2.png") + " " +
          p("r3.png") + " --kind left_eye --identity synthetic --source r2=photo7 --pairwise");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "space4" / "pairwise.csv"));
  EXPECT_EQ(load_space(root / "space4").find("r2")->source_image_id, "photo7");
  r = run("space query " + p("space4") + " " + p("r2_degraded.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_GE(lines(r.out).size(), 2u);
  EXPECT_EQ(lines(r.out)[1].substr(0, 5), "1,r2,");

  r = run("space expand " + p("space4") + " r1 r3 " + p("expanded") + " --steps 0,5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text_file(root / "expanded" / "step_00_0000.png"), read_text_file(root / "space4" / "patches" / "r1.png"));
  EXPECT_TRUE(fs::exists(root / "expanded" / "step_01_0005.png"));
}

TEST_F(Cli, SpaceErrors) {
  fs::create_directories(root / "not_a_space");
  EXPECT_EQ(run("space query " + p("not_a_space") + " " + p("r0.png")).code, 5);
  write_text_file(root / "not_a_space" / "manifest.json", "[1,2");
  EXPECT_EQ(run("space query " + p("not_a_space") + " " + p("r0.png")).code, 5);
  EXPECT_EQ(run("space build " + p("sp_bad") + " " + p("r0.png") + " --kind elbow").code, 4);
  EXPECT_EQ(run("space build " + p("sp_bad") + " " + p("r0.png") + " " + p("d32.png") + " --kind left_eye").code, 3);
  EXPECT_FALSE(anything_named("sp_bad"));
  EXPECT_EQ(run("space build " + p("sp_bad") + " " + p("r0.png") + " --kind left_eye --source zz=q").code, 4);
  run("space build " + p("space_q") + " " + p("r0.png") + " --kind left_eye");
  EXPECT_EQ(run("space query " + p("space_q") + " " + p("d32.png")).code, 3);
  EXPECT_EQ(run("space query " + p("space_q") + " " + p("d32.png") + " --resample").code, 0);
  EXPECT_EQ(run("space expand " + p("space_q") + " r0 nope " + p("ex_bad")).code, 4);
  EXPECT_EQ(run("space expand " + p("space_q") + " r0 r0 " + p("ex_bad") + " --steps 1,x").code, 4);
  EXPECT_FALSE(anything_named("ex_bad"));
  EXPECT_EQ(run("space").code, 4);
}

TEST_F(Cli, EnhanceSyntheticFace) {
  const auto sc = fixture::make_scenario();
  fixture::write_scenario(root / "face", sc);
  const auto r = run("--debug-dir " + p("face_dbg") + " enhance " + p("face/input.json") + " " + p("face/catalog.json") +
                     " " + p("face_out"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 4u);
  const ColorImage composite = read_png(root / "face_out" / "composite.png");
  const ColorImage bright = read_png(root / "face_dbg" / "enhance" / "brightened.png");
  EXPECT_LE(fixture::feature_mae(composite, sc.truth, sc.input), 0.5 * fixture::feature_mae(bright, sc.truth, sc.input));
  const auto rep = nlohmann::json::parse(read_text_file(root / "face_out" / "report.json"));
  EXPECT_EQ(rep.at("features").size(), 4u);
  EXPECT_EQ(rep.at("background_source_id"), "src3");
  EXPECT_FALSE(rep.contains("timing_ms"));
  EXPECT_TRUE(fs::exists(root / "face_dbg" / "enhance" / "selection.csv"));
}

TEST_F(Cli, EnhanceSelfEmbedding) {
  auto sc = fixture::make_scenario();
  SpaceCatalog cat;
  cat.source_images["self"] = sc.input;
  const AffinityConfig cfg;
  cat.spaces[{"synthetic", "frontal", FeatureKind::left_eye}] =
      build_space({fixture::cut(sc.input, FeatureKind::left_eye, "self")}, cfg, false);
  cat.spaces[{"synthetic", "frontal", FeatureKind::mouth}] =
      build_space({fixture::cut(sc.input, FeatureKind::mouth, "self")}, cfg, false);
  sc.catalog = cat;
  fixture::write_scenario(root / "self", sc);
  const auto r = run("--debug-dir " + p("self_dbg") + " enhance " + p("self/input.json") + " " + p("self/catalog.json") +
                     " " + p("self_out"));
  ASSERT_EQ(r.code, 0) << r.err;
  const ColorImage composite = read_png(root / "self_out" / "composite.png");
  const ColorImage bright = read_png(root / "self_dbg" / "enhance" / "brightened.png");
  EXPECT_LE(oracle::max_abs_diff(composite, bright), 2e-2);
}

TEST_F(Cli, EnhanceErrors) {
  const auto sc = fixture::make_scenario();
  fixture::write_scenario(root / "face_err", sc);
  auto m = nlohmann::json::parse(read_text_file(root / "face_err" / "input.json"));
  auto& entries = m["entries"];
  for (auto it = entries.begin(); it != entries.end();)
    it = (*it)["kind"] == "mouth" ? entries.erase(it) : it + 1;
  write_text_file(root / "face_err" / "no_mouth.json", m.dump());
  auto r = run("enhance " + p("face_err/no_mouth.json") + " " + p("face_err/catalog.json") + " " + p("err_out"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("mouth"), std::string::npos) << r.err;
  EXPECT_FALSE(anything_named("err_out"));

  write_text_file(root / "face_err" / "broken.json", "{\"input_image\": 3}");
  EXPECT_EQ(run("enhance " + p("face_err/broken.json") + " " + p("face_err/catalog.json") + " " + p("err_out")).code, 5);
  EXPECT_EQ(run("enhance " + p("face_err/missing.json") + " " + p("face_err/catalog.json") + " " + p("err_out")).code, 2);
  EXPECT_EQ(run("enhance " + p("face_err/input.json") + " " + p("face_err/catalog.json") + " " + p("err_out") +
                " --levels 12")
                .code,
            3);
  EXPECT_FALSE(anything_named("err_out"));
}

TEST_F(Cli, BenchGrids) {
  auto r = run("bench --kind translation " + p("bench_t"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto csv = lines(read_text_file(root / "bench_t" / "curve.csv"));
  EXPECT_EQ(csv.size(), 1 + synth::default_values(synth::ExperimentKind::translation).size());

  r = run("bench --kind rotation --values 4,14,20,30 --history-value 14 --triptychs " + p("bench_r"));
  ASSERT_EQ(r.code, 0) << r.err;
  csv = lines(read_text_file(root / "bench_r" / "curve.csv"));
  ASSERT_EQ(csv.size(), 5u);
  double prev = -1;
  for (std::size_t i = 1; i < csv.size(); ++i) {
    std::vector<std::string> cols;
    std::stringstream ss(csv[i]);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    const double dt = std::stod(cols.at(2));
    EXPECT_GT(dt, prev);
    prev = dt;
  }
  EXPECT_EQ(lines(read_text_file(root / "bench_r" / "history.csv")).size(), 201u);
  EXPECT_TRUE(fs::exists(root / "bench_r" / "triptych_03.png"));

  r = run("--iterations 50 bench --kind gaze " + p("bench_g"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(read_text_file(root / "bench_g" / "gaze_report.json")).contains("mae_r2"));
}

TEST_F(Cli, BenchErrors) {
  EXPECT_EQ(run("bench --values \"\" " + p("bench_bad")).code, 4);
  EXPECT_EQ(run("bench --values 5,1 " + p("bench_bad")).code, 4);
  EXPECT_EQ(run("bench --values 1,a " + p("bench_bad")).code, 4);
  EXPECT_EQ(run("bench --kind shear " + p("bench_bad")).code, 4);
  EXPECT_EQ(run("bench --kind rotation --values 4,14 --history-value 7 " + p("bench_bad")).code, 4);
  EXPECT_FALSE(anything_named("bench_bad"));
}

TEST_F(Cli, ThreadCountDoesNotChangeOutputs) {
  const std::string args = "register " + p("d32.png") + " " + p("d44.png") + " ";
  ASSERT_EQ(run("--threads 1 " + args + p("t1")).code, 0);
  ASSERT_EQ(run("--threads 8 " + args + p("t8")).code, 0);
  ASSERT_EQ(run(args + p("tenv"), "DEMONPATCH_THREADS=3").code, 0);
  for (const char* suffix : {"_deformed.png", "_field.dmnf", "_mae.csv"}) {
    const std::string ref = read_text_file(root / (std::string("t1") + suffix));
    EXPECT_EQ(read_text_file(root / (std::string("t8") + suffix)), ref) << suffix;
    EXPECT_EQ(read_text_file(root / (std::string("tenv") + suffix)), ref) << suffix;
  }
  EXPECT_EQ(run("--threads -2 " + args + p("tneg")).code, 4);
}
