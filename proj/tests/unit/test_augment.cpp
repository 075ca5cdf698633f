#include <gtest/gtest.h>

#include <set>

#include "trav/augment.hpp"
#include "trav/errors.hpp"
#include "trav/rng.hpp"

namespace trav {
namespace {

constexpr int kW = 96;
constexpr int kH = 64;
constexpr int kStride = 4;

AugmentationParams crop(double x, double y, double w, double h, bool flip = false) {
  AugmentationParams p;
  p.crop_x = x;
  p.crop_y = y;
  p.crop_width = w;
  p.crop_height = h;
  p.flip = flip;
  return p;
}

TEST(Augmentation, SampledParamsRespectConfig) {
  Rng rng(10);
  const AugmentConfig cfg;
  int flips = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = sample_augmentation(rng, kW, kH, cfg);
    EXPECT_NO_THROW(p.validate(kW, kH));
    const double area = p.crop_width * p.crop_height / (kW * kH);
    EXPECT_GE(area, cfg.scale_min - 1e-12);
    EXPECT_LE(area, cfg.scale_max + 1e-12);
    EXPECT_NEAR(p.crop_width / p.crop_height, 1.5, 1e-12);
    for (double f : {p.brightness, p.contrast, p.saturation}) {
      EXPECT_GE(f, 1.0 - cfg.jitter);
      EXPECT_LE(f, 1.0 + cfg.jitter);
    }
    flips += p.flip ? 1 : 0;
  }
  EXPECT_GT(flips, 200);
  EXPECT_LT(flips, 300);
}

TEST(Augmentation, ValidateRejectsCropOutsideImage) {
  EXPECT_THROW(crop(50, 0, 50, 64).validate(kW, kH), InputError);
  EXPECT_THROW(crop(0, 0, 0, 64).validate(kW, kH), InputError);
  EXPECT_NO_THROW(crop(0, 0, 96, 64).validate(kW, kH));
}

TEST(Augmentation, ViewSourceRoundTrip) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto p = sample_augmentation(rng, kW, kH, AugmentConfig{});
    const Eigen::Vector2d v(rng.uniform(0, kW), rng.uniform(0, kH));
    const Eigen::Vector2d back = source_to_view(p, kW, kH, view_to_source(p, kW, kH, v));
    EXPECT_LT((back - v).norm(), 1e-9);
  }
}

TEST(Augmentation, IdentityLeavesImageUnchanged) {
  Rng rng(3);
  RowMatrix<double> img(3, kW * kH);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  const auto out = apply_augmentation<double>(img, kW, kH, AugmentationParams::identity(kW, kH));
  EXPECT_LT((out - img).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Augmentation, FlipMirrorsColumns) {
  Rng rng(4);
  RowMatrix<double> img(3, kW * kH);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  const auto out = apply_augmentation<double>(img, kW, kH, crop(0, 0, kW, kH, true));
  for (int y = 0; y < kH; y += 7) {
    for (int x = 0; x < kW; x += 5) {
      EXPECT_NEAR(out(1, y * kW + x), img(1, y * kW + (kW - 1 - x)), 1e-12);
    }
  }
}

TEST(Augmentation, OutputStaysInUnitRange) {
  Rng rng(6);
  RowMatrix<float> img(3, kW * kH);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(rng.uniform());
  AugmentConfig strong;
  strong.jitter = 0.9;
  for (int i = 0; i < 20; ++i) {
    const auto out = apply_augmentation<float>(img, kW, kH, sample_augmentation(rng, kW, kH, strong));
    EXPECT_GE(out.minCoeff(), 0.0f);
    EXPECT_LE(out.maxCoeff(), 1.0f);
  }
}

TEST(PixelCorrespondence, IdenticalParamsPairEveryCell) {
  const auto p = crop(10, 5, 60, 40, true);
  const PixelPairs pairs = pixel_correspondence(p, p, kW, kH, kStride);
  ASSERT_EQ(pairs.size(), static_cast<std::size_t>((kW / kStride) * (kH / kStride)));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EXPECT_EQ(pairs.first[k], static_cast<int>(k));
    EXPECT_EQ(pairs.second[k], static_cast<int>(k));
  }
}

TEST(PixelCorrespondence, DisjointCropsAreEmpty) {
  const PixelPairs pairs = pixel_correspondence(crop(0, 0, 40, 30), crop(50, 30, 40, 30), kW, kH, kStride);
  EXPECT_EQ(pairs.size(), 0u);
}

TEST(PixelCorrespondence, OneCellShift) {
  // Half-size crops magnify by 2, so one 4-pixel cell is 2 source pixels.
  const PixelPairs pairs = pixel_correspondence(crop(0, 0, 48, 32), crop(2, 0, 48, 32), kW, kH, kStride);
  const int gw = kW / kStride;
  const int gh = kH / kStride;
  ASSERT_EQ(pairs.size(), static_cast<std::size_t>((gw - 1) * gh));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EXPECT_EQ(pairs.first[k], pairs.second[k] + 1);
    EXPECT_NE(pairs.first[k] % gw, 0);
  }
}

TEST(PixelCorrespondence, PairsAreUniqueAndClose) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = sample_augmentation(rng, kW, kH, AugmentConfig{});
    const auto b = sample_augmentation(rng, kW, kH, AugmentConfig{});
    const PixelPairs pairs = pixel_correspondence(a, b, kW, kH, kStride);
    std::set<int> firsts(pairs.first.begin(), pairs.first.end());
    std::set<int> seconds(pairs.second.begin(), pairs.second.end());
    EXPECT_EQ(firsts.size(), pairs.size());
    EXPECT_EQ(seconds.size(), pairs.size());
    const int gw = kW / kStride;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const int f = pairs.first[k];
      const int s = pairs.second[k];
      const auto sa = view_to_source(a, kW, kH, {(f % gw + 0.5) * kStride, (f / gw + 0.5) * kStride});
      const auto sb = view_to_source(b, kW, kH, {(s % gw + 0.5) * kStride, (s / gw + 0.5) * kStride});
      EXPECT_LE((sa - sb).cwiseAbs().maxCoeff(), 0.5 * kStride + 1e-12);
      if (k > 0) EXPECT_LT(pairs.first[k - 1], f);
    }
  }
}

}  // namespace
}  // namespace trav
