#include <gtest/gtest.h>

#include "oracles.hpp"
#include "trav/raster.hpp"
#include "trav/rng.hpp"

namespace trav {
namespace {

PixelPolygon random_quad(Rng& rng, int size, bool snap) {
  PixelPolygon q;
  for (int k = 0; k < 4; ++k) {
    double x = rng.uniform(-0.3 * size, 1.3 * size);
    double y = rng.uniform(-0.3 * size, 1.3 * size);
    if (snap) {
      // Half-pixel lattice: vertices and many edges pass exactly through centers.
      x = std::round(x * 2.0) / 2.0;
      y = std::round(y * 2.0) / 2.0;
    }
    q.emplace_back(x, y);
  }
  return q;
}

TEST(PolygonContains, BoundaryCountsInside) {
  const PixelPolygon square = {{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  EXPECT_TRUE(polygon_contains(square, {1, 1}));
  EXPECT_TRUE(polygon_contains(square, {0, 1}));
  EXPECT_TRUE(polygon_contains(square, {2, 2}));
  EXPECT_TRUE(polygon_contains(square, {1, 0}));
  EXPECT_FALSE(polygon_contains(square, {2.0000001, 1}));
  EXPECT_FALSE(polygon_contains(square, {-1, -1}));
}

TEST(RasterizeQuads, FullCover) {
  const std::vector<PixelPolygon> quads = {{{-5, -5}, {50, -5}, {50, 50}, {-5, 50}}};
  const LabelMask m = rasterize_quads(quads, 32, 24);
  EXPECT_EQ(m.count(LabelCode::Positive), 32u * 24u);
}

TEST(RasterizeQuads, EmptyListIsUnlabeled) {
  const LabelMask m = rasterize_quads({}, 8, 8);
  EXPECT_EQ(m.count(LabelCode::Unlabeled), 64u);
}

TEST(RasterizeQuads, DegenerateQuadHasNoInterior) {
  // Zero-area quad strictly between pixel centers.
  const std::vector<PixelPolygon> quads = {{{1.2, 1.2}, {6.8, 6.8}, {6.8, 6.8}, {1.2, 1.2}}};
  const LabelMask m = rasterize_quads(quads, 8, 8);
  // Only centers exactly on the segment could be counted; (k + 0.5, k + 0.5) are.
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const bool on_diagonal = r == c && r >= 1 && r <= 6;
      EXPECT_EQ(m.at(r, c) == LabelCode::Positive, on_diagonal) << r << "," << c;
    }
  }
  const std::vector<PixelPolygon> offset = {{{1.1, 1.3}, {6.1, 6.3}, {6.1, 6.3}, {1.1, 1.3}}};
  EXPECT_EQ(rasterize_quads(offset, 8, 8).count(LabelCode::Positive), 0u);
}

TEST(RasterizeQuads, MatchesBruteForceOnRandomScenes) {
  Rng rng(2024);
  for (int scene = 0; scene < 300; ++scene) {
    const bool snap = scene % 2 == 0;
    std::vector<PixelPolygon> quads;
    const int count = 1 + static_cast<int>(rng.index(4));
    for (int k = 0; k < count; ++k) quads.push_back(random_quad(rng, 32, snap));
    const LabelMask got = rasterize_quads(quads, 32, 32);
    const LabelMask want = oracle::brute_force_mask(quads, 32, 32);
    ASSERT_EQ(got, want) << "scene " << scene;
  }
}

TEST(RasterizeQuads, LargeCoordinatesAndThinSlivers) {
  Rng rng(5);
  for (int scene = 0; scene < 200; ++scene) {
    std::vector<PixelPolygon> quads;
    const double x = rng.uniform(0, 32);
    const double y = rng.uniform(0, 32);
    const double dx = rng.uniform(-1e4, 1e4);
    const double dy = rng.uniform(-1e4, 1e4);
    const double w = rng.uniform(0.01, 0.6);
    quads.push_back({{x - dx, y - dy}, {x + dx, y + dy}, {x + dx + w, y + dy}, {x - dx + w, y - dy}});
    ASSERT_EQ(rasterize_quads(quads, 32, 32), oracle::brute_force_mask(quads, 32, 32)) << scene;
  }
}

}  // namespace
}  // namespace trav
