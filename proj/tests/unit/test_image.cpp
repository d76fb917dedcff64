#include <gtest/gtest.h>

#include <random>

#include "demonpatch/image.hpp"
#include "oracles.hpp"

using namespace demonpatch;

TEST(Plane, ShapeAndAccess) {
  Plane p(4, 3, 0.25);
  EXPECT_EQ(p.width(), 4);
  EXPECT_EQ(p.height(), 3);
  EXPECT_EQ(p.size(), 12u);
  p(3, 2) = 0.75;
  EXPECT_DOUBLE_EQ(p.pixels()[11], 0.75);
  EXPECT_DOUBLE_EQ(p.clamped(10, 10), 0.75);
  EXPECT_DOUBLE_EQ(p.clamped(-3, 0), 0.25);
  EXPECT_EQ(p.row(2).size(), 4u);
}

TEST(Plane, RejectsBadData) {
  EXPECT_THROW(Plane(2, 2, std::vector<double>(3)), DimensionError);
  EXPECT_THROW(Plane(-1, 2), DimensionError);
  EXPECT_THROW(ColorImage(Plane(2, 2), Plane(2, 2), Plane(3, 2)), DimensionError);
}

TEST(Hsv, PrimaryCorners) {
  auto red = rgb_to_hsv(1.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(red[0], 0.0);
  EXPECT_DOUBLE_EQ(red[1], 1.0);
  EXPECT_DOUBLE_EQ(red[2], 1.0);
  auto gray = rgb_to_hsv(0.5, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(gray[0], 0.0);
  EXPECT_DOUBLE_EQ(gray[1], 0.0);
  EXPECT_DOUBLE_EQ(gray[2], 0.5);
  auto green = rgb_to_hsv(0.0, 1.0, 0.0);
  EXPECT_NEAR(green[0], 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(green[1], 1.0);
  auto blue = rgb_to_hsv(0.0, 0.0, 1.0);
  EXPECT_NEAR(blue[0], 2.0 / 3.0, 1e-15);
  auto black = rgb_to_hsv(0, 0, 0);
  EXPECT_EQ(black, (std::array<double, 3>{0, 0, 0}));
}

TEST(Hsv, HueStaysBelowOne) {
  // tiny negative (g - b) must not produce h == 1
  auto h = rgb_to_hsv(1.0, 0.0, 1e-17);
  EXPECT_GE(h[0], 0.0);
  EXPECT_LT(h[0], 1.0);
}

TEST(Hsv, RoundTripRandomized) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const ColorImage img = oracle::random_color(9, 7, rng);
    const HsvImage hsv = rgb_to_hsv(img);
    const ColorImage back = hsv_to_rgb(hsv);
    for (std::size_t i = 0; i < img[0].size(); ++i) {
      if (hsv.s.pixels()[i] <= 1e-6) continue;
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(back[c].pixels()[i], img[c].pixels()[i], 1e-6);
    }
    for (double v : hsv.h.pixels()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  }
}

TEST(Hsv, AchromaticRoundTrip) {
  ColorImage g = ColorImage::gray(Plane(3, 3, 0.4));
  EXPECT_EQ(hsv_to_rgb(rgb_to_hsv(g)), g);
}

TEST(Stats, MeanAbsDiff) {
  Plane a(2, 2, std::vector<double>{0, 0.5, 1, 0.25});
  Plane b(2, 2, std::vector<double>{0.5, 0.5, 0, 0.25});
  EXPECT_DOUBLE_EQ(mean_abs_diff(a, b), 0.375);
  EXPECT_DOUBLE_EQ(mean_abs_diff(a, a), 0.0);
  EXPECT_THROW(mean_abs_diff(a, Plane(3, 2)), DimensionError);
  EXPECT_DOUBLE_EQ(mean(a), 0.4375);
}

TEST(Regions, CropPasteInside) {
  std::mt19937_64 rng(3);
  const Plane p = oracle::random_plane(10, 8, rng);
  const Rect r{2, 3, 4, 2};
  const Plane c = crop(p, r);
  EXPECT_EQ(c.width(), 4);
  EXPECT_DOUBLE_EQ(c(1, 1), p(3, 4));
  Plane q(10, 8, 0.0);
  paste(q, c, r.x, r.y);
  EXPECT_EQ(crop(q, r), c);
  EXPECT_THROW(crop(p, Rect{8, 0, 4, 2}), DimensionError);
  EXPECT_FALSE(inside(Rect{0, 0, 0, 3}, 10, 8));
  EXPECT_TRUE(inside(Rect{0, 0, 10, 8}, 10, 8));
}

TEST(Regions, PasteClipsAtBorders) {
  Plane dst(4, 4, 0.0);
  paste(dst, Plane(3, 3, 1.0), 2, 2);
  EXPECT_DOUBLE_EQ(dst(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(dst(1, 1), 0.0);
}

TEST(Luma, Gray) {
  ColorImage g = ColorImage::gray(Plane(2, 2, 0.3));
  EXPECT_NEAR(mean(luminance(g)), 0.3, 1e-12);
}
