#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trav/geometry.hpp"

namespace trav {

/// On-disk dataset layout:
///   images/<frame_id>.png   8-bit RGB
///   poses.csv               frame_id,timestamp,tx,ty,tz,qx,qy,qz,qw (world_from_base)
///   calib.json              fx,fy,cx,cy,width,height,base_from_camera{tx..qw}
///   labels/<frame_id>.png   self-supervised labels, labels/manifest.json
///   gt/<frame_id>.png       ground truth (synthetic worlds only)
struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path images_dir() const { return root / "images"; }
  std::filesystem::path labels_dir() const { return root / "labels"; }
  std::filesystem::path gt_dir() const { return root / "gt"; }
  std::filesystem::path poses_file() const { return root / "poses.csv"; }
  std::filesystem::path calib_file() const { return root / "calib.json"; }
  std::filesystem::path image_path(const std::string& id) const { return images_dir() / (id + ".png"); }
  std::filesystem::path label_path(const std::string& id) const { return labels_dir() / (id + ".png"); }
  std::filesystem::path gt_path(const std::string& id) const { return gt_dir() / (id + ".png"); }
};

struct PoseRecord {
  std::string frame_id;
  VehiclePose pose;
};

CameraRig read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const CameraRig& rig);

std::vector<PoseRecord> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<PoseRecord>& poses);

/// Sorted stems of the *.png files in `dir`; empty when the directory is absent.
std::vector<std::string> list_png_stems(const std::filesystem::path& dir);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace trav
