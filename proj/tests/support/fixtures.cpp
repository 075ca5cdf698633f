#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "trav/labels.hpp"

namespace trav::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("trav_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CameraRig default_rig() {
  CameraRig rig;
  rig.fx = 48.0;
  rig.fy = 48.0;
  rig.cx = 48.0;
  rig.cy = 32.0;
  rig.width = 96;
  rig.height = 64;
  rig.base_from_camera = forward_camera_mount(1.5, 15.0 * std::numbers::pi / 180.0);
  return rig;
}

std::vector<VehiclePose> straight_drive(double distance, double speed, double dt) {
  std::vector<VehiclePose> poses;
  const auto n = static_cast<int>(std::lround(distance / speed / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    poses.push_back({t, RigidTransform::from_yaw(0.0, Eigen::Vector3d(speed * t, 0.0, 0.0))});
  }
  return poses;
}

WorldSpec tiny_world_spec(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.world_size = 100.0;
  spec.image_width = 48;
  spec.image_height = 32;
  spec.focal = 24.0;
  spec.train_frames = 6;
  spec.heldout_frames = 3;
  spec.shifted_frames = 3;
  return spec;
}

fs::path make_tiny_dataset(const fs::path& root, std::uint64_t seed) {
  generate_world(tiny_world_spec(seed), root);
  generate_dataset_labels(root / "train", LabelParams{});
  return root / "train";
}

TrainConfig tiny_train_config(const fs::path& dataset_root) {
  TrainConfig c;
  c.dataset_root = dataset_root.string();
  c.batch_size = 3;
  c.epochs = 2;
  c.embed_dim = 8;
  c.base_width = 4;
  c.prototypes = 4;
  c.pixels_per_objective = 64;
  c.prototype_freeze_epochs = 1;
  c.precision = "float64";
  return c;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trav::testing
