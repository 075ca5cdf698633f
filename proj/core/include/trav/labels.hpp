#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trav/geometry.hpp"
#include "trav/raster.hpp"

namespace trav {

struct LabelParams {
  double horizon = 3.0;  // seconds of future trajectory painted into a frame
  double stride = 0.1;   // seconds between footprint samples
  FootprintSpec footprint{2.0, 1.0, 0.0};
  double z_near = kDefaultZNear;
  int workers = 1;

  void validate() const;
};

/// Pixel polygons of the footprint sweep seen from the camera at `frame_time`:
/// one rectangle per sample time plus one connector per consecutive pair, each
/// clipped against the near plane. Requires coverage of [frame_time, frame_time + horizon].
std::vector<PixelPolygon> footprint_sweep_polygons(double frame_time, std::span<const VehiclePose> trajectory,
                                                   const CameraRig& rig, const LabelParams& params);

struct FrameLabelResult {
  std::optional<LabelMask> mask;
  std::string skip_reason;  // set when mask is empty
};

FrameLabelResult generate_frame_labels(double frame_time, std::span<const VehiclePose> trajectory,
                                       const CameraRig& rig, const LabelParams& params);

struct DatasetLabelReport {
  std::vector<std::string> labeled;
  std::vector<std::pair<std::string, std::string>> skipped;  // (frame_id, reason)
  std::string params_digest;
};

/// Labels every frame of a dataset that has both an image and a pose record.
/// Writes labels/<frame_id>.png and labels/manifest.json under `dataset_root`.
DatasetLabelReport generate_dataset_labels(const std::filesystem::path& dataset_root, const LabelParams& params);

}  // namespace trav
