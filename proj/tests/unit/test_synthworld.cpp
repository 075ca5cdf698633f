#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trav/dataset.hpp"
#include "trav/errors.hpp"
#include "trav/image_io.hpp"
#include "trav/labels.hpp"
#include "trav/synthworld.hpp"

namespace fs = std::filesystem;

namespace trav {
namespace {

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::read_file(e.path());
  }
  return out;
}

WorldSpec twenty_frame_spec(double rho) {
  WorldSpec spec;
  spec.seed = 5;
  spec.world_size = 120.0;
  spec.traversable_fraction = rho;
  spec.train_frames = 20;
  spec.heldout_frames = 0;
  spec.shifted_frames = 0;
  return spec;
}

TEST(Synthworld, SameSeedIsByteIdentical) {
  testing::TempDir dir("synth_det");
  generate_world(testing::tiny_world_spec(3), dir / "a", 1);
  generate_world(testing::tiny_world_spec(3), dir / "b", 3);
  const auto a = tree_contents(dir / "a");
  const auto b = tree_contents(dir / "b");
  EXPECT_EQ(a.size(), 31u);  // world.json, 3 x (calib, poses), 12 images, 12 masks
  EXPECT_TRUE(a == b);
  generate_world(testing::tiny_world_spec(4), dir / "c", 1);
  EXPECT_NE(tree_contents(dir / "c").at("train/images/000000.png"), a.at("train/images/000000.png"));
}

TEST(Synthworld, LayoutMatchesDatasetReaders) {
  testing::TempDir dir("synth_layout");
  generate_world(testing::tiny_world_spec(), dir.path(), 1);
  for (const char* split : {"train", "heldout", "heldout_shifted"}) {
    const DatasetLayout layout{dir / split};
    const CameraRig rig = read_calibration(layout.calib_file());
    EXPECT_EQ(rig.width, 48);
    const auto poses = read_poses(layout.poses_file());
    const auto ids = list_png_stems(layout.images_dir());
    EXPECT_EQ(ids, list_png_stems(layout.gt_dir()));
    std::size_t with_id = 0;
    for (const auto& p : poses) with_id += p.frame_id.empty() ? 0 : 1;
    EXPECT_EQ(with_id, ids.size());
    EXPECT_GT(poses.size(), with_id);
  }
}

TEST(Synthworld, FractionAndTrajectoryInvariants) {
  for (double rho : {0.3, 0.5, 0.8}) {
    const World world(twenty_frame_spec(rho));
    EXPECT_NEAR(world.traversable_fraction(), rho, 0.05);
    // Independent estimate on an offset grid.
    std::int64_t hits = 0;
    std::int64_t total = 0;
    for (double x = 0.1; x < 120.0; x += 0.7) {
      for (double y = 0.3; y < 120.0; y += 0.7) {
        hits += world.is_traversable(x, y) ? 1 : 0;
        ++total;
      }
    }
    EXPECT_NEAR(static_cast<double>(hits) / total, rho, 0.05) << rho;
    for (const auto& split : world.splits()) {
      for (const auto& p : split.poses) {
        for (const auto& c : footprint_corners(p.pose, FootprintSpec{2.0, 1.0, 0.0})) {
          EXPECT_TRUE(world.is_traversable(c.x(), c.y()));
        }
      }
    }
  }
}

TEST(Synthworld, FullyTraversableWorld) {
  testing::TempDir dir("synth_rho1");
  WorldSpec spec = testing::tiny_world_spec();
  spec.traversable_fraction = 1.0;
  generate_world(spec, dir.path(), 1);
  for (const auto& id : list_png_stems(dir / "train" / "gt")) {
    const Image8 gt = read_png(dir / "train" / "gt" / (id + ".png"), 1);
    for (int row = 0; row < gt.height; ++row) {
      for (int col = 0; col < gt.width; ++col) {
        const std::uint8_t v = gt.at(row, col);
        EXPECT_TRUE(v == kMaskPositive || v == kMaskIgnore);
        if (row >= gt.height - 4) EXPECT_EQ(v, kMaskPositive);
      }
    }
  }
}

TEST(Synthworld, GroundTruthMatchesRayCastOracle) {
  testing::TempDir dir("synth_oracle");
  const WorldSpec spec = twenty_frame_spec(0.5);
  generate_world(spec, dir.path(), 1);
  const World world(spec);
  const CameraRig rig = spec.camera();
  std::int64_t gt_pos = 0;
  std::int64_t gt_valid = 0;
  std::int64_t oracle_pos = 0;
  std::int64_t oracle_valid = 0;
  std::int64_t disagree = 0;
  std::int64_t pixels = 0;
  for (const auto& p : read_poses(dir / "train" / "poses.csv")) {
    if (p.frame_id.empty()) continue;
    const Image8 gt = read_png(dir / "train" / "gt" / (p.frame_id + ".png"), 1);
    const RigidTransform world_from_camera = p.pose.world_from_base * rig.base_from_camera;
    for (int row = 0; row < rig.height; ++row) {
      for (int col = 0; col < rig.width; ++col) {
        std::uint8_t expect = kMaskIgnore;
        Eigen::Vector3d hit;
        if (oracle::pixel_ground_hit(world_from_camera, rig, col + 0.5, row + 0.5, hit)) {
          const double range = (hit - world_from_camera.translation()).head<2>().norm();
          if (range <= spec.max_range) expect = world.is_traversable(hit.x(), hit.y()) ? kMaskPositive : 0;
        }
        const std::uint8_t got = gt.at(row, col);
        disagree += got != expect ? 1 : 0;
        ++pixels;
        if (got != kMaskIgnore) {
          ++gt_valid;
          gt_pos += got == kMaskPositive ? 1 : 0;
        }
        if (expect != kMaskIgnore) {
          ++oracle_valid;
          oracle_pos += expect == kMaskPositive ? 1 : 0;
        }
      }
    }
  }
  ASSERT_GT(gt_valid, 0);
  EXPECT_NEAR(static_cast<double>(gt_pos) / gt_valid, static_cast<double>(oracle_pos) / oracle_valid, 0.05);
  EXPECT_LE(disagree, pixels / 1000);
}

TEST(Synthworld, CorridorsTooWideForFraction) {
  WorldSpec spec = twenty_frame_spec(0.01);
  spec.world_size = 60.0;
  try {
    World world(spec);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("larger traversable_fraction"), std::string::npos);
  }
}

TEST(Synthworld, RejectsBadSpec) {
  WorldSpec spec;
  spec.traversable_fraction = 0.0;
  EXPECT_THROW(spec.validate(), InputError);
  spec = WorldSpec{};
  spec.frame_interval = 0.33;
  EXPECT_THROW(spec.validate(), InputError);
}

TEST(Synthworld, SelfSupervisedLabelsAreMostlyTrue) {
  testing::TempDir dir("synth_purity");
  const fs::path train = testing::make_tiny_dataset(dir.path(), 2);
  std::int64_t labeled = 0;
  std::int64_t correct = 0;
  std::int64_t gt_positive = 0;
  for (const auto& id : list_png_stems(train / "labels")) {
    const Image8 label = read_png(train / "labels" / (id + ".png"), 1);
    const Image8 gt = read_png(train / "gt" / (id + ".png"), 1);
    for (std::size_t k = 0; k < gt.data.size(); ++k) {
      gt_positive += gt.data[k] == kMaskPositive ? 1 : 0;
      if (label.data[k] != kMaskPositive) continue;
      ++labeled;
      correct += gt.data[k] == kMaskPositive ? 1 : 0;
    }
  }
  ASSERT_GT(labeled, 0);
  EXPECT_GE(static_cast<double>(correct) / labeled, 0.99);
  EXPECT_LT(correct, gt_positive);
}

TEST(Synthworld, ShiftedSplitUsesOtherPalette) {
  const WorldSpec spec;
  EXPECT_NE(spec.palette.traversable.mean, spec.shifted.traversable.mean);
  EXPECT_NE(spec.palette.sky, spec.shifted.sky);
  const World world(testing::tiny_world_spec());
  ASSERT_EQ(world.splits().size(), 3u);
  EXPECT_FALSE(world.splits()[0].shifted);
  EXPECT_TRUE(world.splits()[2].shifted);
}

}  // namespace
}  // namespace trav
