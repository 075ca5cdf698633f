#include "trav/labels.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "trav/dataset.hpp"
#include "trav/digest.hpp"
#include "trav/errors.hpp"
#include "trav/image_io.hpp"
#include "trav/parallel.hpp"

namespace trav {

namespace fs = std::filesystem;
using nlohmann::json;

void LabelParams::validate() const {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InputError("label horizon must be >= 0");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw InputError("label stride must be > 0");
  if (!(z_near > 0.0)) throw InputError("z_near must be > 0");
  footprint.validate();
}

namespace {

constexpr double kTimeSlack = 1e-9;

std::vector<double> sample_times(double frame_time, const LabelParams& params, double last) {
  const auto steps = static_cast<long>(std::floor(params.horizon / params.stride + kTimeSlack));
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k <= steps; ++k) {
    times.push_back(std::min(frame_time + static_cast<double>(k) * params.stride, last));
  }
  return times;
}

PixelPolygon project_polygon(std::span<const Eigen::Vector3d> world, const RigidTransform& camera_from_world,
                             const CameraRig& rig, double z_near) {
  std::vector<Eigen::Vector3d> cam;
  cam.reserve(world.size());
  for (const auto& p : world) cam.push_back(camera_from_world.apply(p));
  PixelPolygon out;
  for (const auto& p : clip_to_near_plane(cam, z_near)) out.push_back(project_camera_point(p, rig));
  return out;
}

}  // namespace

std::vector<PixelPolygon> footprint_sweep_polygons(double frame_time, std::span<const VehiclePose> trajectory,
                                                   const CameraRig& rig, const LabelParams& params) {
  params.validate();
  if (trajectory.size() < 2) throw InputError("footprint sweep needs at least two poses");
  const double first = trajectory.front().timestamp;
  const double last = trajectory.back().timestamp;
  if (frame_time < first || frame_time + params.horizon > last + kTimeSlack) {
    throw RangeError("trajectory does not cover the label horizon");
  }
  const VehiclePose frame_pose = interpolate_pose(trajectory, frame_time);
  const RigidTransform camera_from_world = (frame_pose.world_from_base * rig.base_from_camera).inverse();

  std::vector<std::array<Eigen::Vector3d, 4>> footprints;
  for (double t : sample_times(frame_time, params, last)) {
    footprints.push_back(footprint_corners(interpolate_pose(trajectory, t), params.footprint));
  }

  std::vector<PixelPolygon> polygons;
  polygons.reserve(2 * footprints.size());
  for (std::size_t k = 0; k < footprints.size(); ++k) {
    const auto& f = footprints[k];
    polygons.push_back(project_polygon(f, camera_from_world, rig, params.z_near));
    if (k + 1 < footprints.size()) {
      const auto& g = footprints[k + 1];
      // Rear edge of this footprint to the front edge of the next one.
      const std::array<Eigen::Vector3d, 4> connector = {f[3], f[2], g[1], g[0]};
      polygons.push_back(project_polygon(connector, camera_from_world, rig, params.z_near));
    }
  }
  std::erase_if(polygons, [](const PixelPolygon& p) { return p.empty(); });
  return polygons;
}

FrameLabelResult generate_frame_labels(double frame_time, std::span<const VehiclePose> trajectory,
                                       const CameraRig& rig, const LabelParams& params) {
  rig.validate();
  if (trajectory.size() < 2) return {std::nullopt, "trajectory has fewer than two poses"};
  if (frame_time + params.horizon > trajectory.back().timestamp + kTimeSlack) {
    return {std::nullopt, "insufficient trajectory coverage for horizon"};
  }
  if (frame_time < trajectory.front().timestamp) return {std::nullopt, "frame precedes trajectory"};
  const auto polygons = footprint_sweep_polygons(frame_time, trajectory, rig, params);
  return {rasterize_quads(polygons, rig.width, rig.height), {}};
}

DatasetLabelReport generate_dataset_labels(const fs::path& dataset_root, const LabelParams& params) {
  params.validate();
  const DatasetLayout layout{dataset_root};
  const CameraRig rig = read_calibration(layout.calib_file());
  const std::vector<PoseRecord> records = read_poses(layout.poses_file());

  std::vector<VehiclePose> trajectory;
  trajectory.reserve(records.size());
  std::map<std::string, double> frame_time;
  for (const auto& r : records) {
    trajectory.push_back(r.pose);
    frame_time.emplace(r.frame_id, r.pose.timestamp);
  }

  const std::vector<std::string> frames = list_png_stems(layout.images_dir());
  fs::create_directories(layout.labels_dir());

  std::vector<std::string> reasons(frames.size());
  parallel_for(frames.size(), params.workers, [&](std::size_t i) {
    const auto it = frame_time.find(frames[i]);
    if (it == frame_time.end()) {
      reasons[i] = "no pose record for frame";
      return;
    }
    FrameLabelResult res = generate_frame_labels(it->second, trajectory, rig, params);
    if (!res.mask) {
      reasons[i] = res.skip_reason;
      return;
    }
    write_png(layout.label_path(frames[i]), encode_label_mask(*res.mask));
  });

  json params_json{{"horizon", params.horizon},
                   {"stride", params.stride},
                   {"footprint_width", params.footprint.width},
                   {"footprint_length", params.footprint.length},
                   {"ground_offset", params.footprint.ground_offset},
                   {"z_near", params.z_near}};
  DatasetLabelReport report;
  report.params_digest = sha256_hex(params_json.dump());
  json skipped = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (reasons[i].empty()) {
      report.labeled.push_back(frames[i]);
    } else {
      report.skipped.emplace_back(frames[i], reasons[i]);
      skipped.push_back({{"frame_id", frames[i]}, {"reason", reasons[i]}});
    }
  }
  json manifest{{"params", params_json},
                {"params_digest", report.params_digest},
                {"frames", report.labeled},
                {"skipped", skipped}};
  std::ofstream out(layout.labels_dir() / "manifest.json");
  if (!out) throw DataError("cannot write labels manifest");
  out << manifest.dump(2) << '\n';
  return report;
}

}  // namespace trav
