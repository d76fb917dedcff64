#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "demonpatch/field.hpp"
#include "demonpatch/png_io.hpp"
#include "demonpatch/staging.hpp"
#include "oracles.hpp"

using namespace demonpatch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dp_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Png, GrayRoundTrip) {
  TempDir tmp;
  std::mt19937_64 rng(1);
  const Plane p = oracle::random_levels(13, 7, rng);
  write_png(tmp.path / "g.png", p);
  const ColorImage back = read_png(tmp.path / "g.png");
  EXPECT_TRUE(is_gray(back));
  EXPECT_EQ(read_png_gray(tmp.path / "g.png"), p);
}

TEST(Png, ColorRoundTripQuantizes) {
  TempDir tmp;
  std::mt19937_64 rng(2);
  const ColorImage c = oracle::random_color(9, 11, rng);
  write_png(tmp.path / "c.png", c);
  const ColorImage back = read_png(tmp.path / "c.png");
  EXPECT_EQ(back, quantize8(c));
  EXPECT_LE(oracle::max_abs_diff(back, c), 0.5 / 255 + 1e-12);
}

TEST(Png, Errors) {
  TempDir tmp;
  EXPECT_THROW(read_png(tmp.path / "missing.png"), IoError);
  write_text_file(tmp.path / "junk.png", "not a png");
  EXPECT_THROW(read_png(tmp.path / "junk.png"), IoError);
}

TEST(Dmnf, RoundTripAndLayout) {
  std::mt19937_64 rng(3);
  const auto f = oracle::smooth_field(5, 3, 2.0, rng);
  std::stringstream ss;
  write_field(ss, f);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 12u + 2 * 5 * 3 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "DMNF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 5);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);
  const auto back = read_field(ss);
  ASSERT_EQ(back.width(), 5);
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    EXPECT_EQ(back.dx.pixels()[i], static_cast<double>(static_cast<float>(f.dx.pixels()[i])));
    EXPECT_EQ(back.dy.pixels()[i], static_cast<double>(static_cast<float>(f.dy.pixels()[i])));
  }
}

TEST(Dmnf, Malformed) {
  std::stringstream bad_magic("XXXX\x01\0\0\0\x01\0\0\0");
  EXPECT_THROW(read_field(bad_magic), FormatError);
  std::stringstream ss;
  write_field(ss, DisplacementField(4, 4));
  std::string truncated = ss.str().substr(0, 30);
  std::stringstream tr(truncated);
  EXPECT_THROW(read_field(tr), FormatError);
}

TEST(Staging, CommitAndAbandon) {
  TempDir tmp;
  {
    StagedOutputs st;
    write_text_file(st.stage(tmp.path / "a.txt"), "x");
    EXPECT_FALSE(fs::exists(tmp.path / "a.txt"));
  }
  EXPECT_FALSE(fs::exists(tmp.path / "a.txt"));
  EXPECT_FALSE(fs::exists(tmp.path / "a.txt.partial"));
  {
    StagedOutputs st;
    write_text_file(st.stage(tmp.path / "sub" / "b.txt"), "y");
    st.commit();
  }
  EXPECT_EQ(read_text_file(tmp.path / "sub" / "b.txt"), "y");
}
