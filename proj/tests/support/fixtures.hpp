#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trav/geometry.hpp"
#include "trav/pipeline.hpp"
#include "trav/synthworld.hpp"

namespace trav::testing {

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

/// 96x64 camera 1.5 m up, pitched 15 degrees down, f = 48.
CameraRig default_rig();

/// Straight drive along +x at `speed` m/s, one pose every `dt` seconds.
std::vector<VehiclePose> straight_drive(double distance, double speed, double dt);

/// Small world: 48x32 images and a handful of frames per split.
WorldSpec tiny_world_spec(std::uint64_t seed = 0);

/// Generates the tiny world under `root` and labels its train split.
std::filesystem::path make_tiny_dataset(const std::filesystem::path& root, std::uint64_t seed = 0);

/// Config sized for the tiny world: a few seconds of training in total.
TrainConfig tiny_train_config(const std::filesystem::path& dataset_root);

std::string read_file(const std::filesystem::path& path);

}  // namespace trav::testing
