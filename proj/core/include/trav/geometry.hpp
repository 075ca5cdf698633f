#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace trav {

/// Frame conventions: base (vehicle) frame is x forward, y left, z up.
/// Camera frame is x right, y down, z forward. Pixel (col, row) spans
/// [col, col+1) x [row, row+1), so its center is (col + 0.5, row + 0.5).

/// Unit Hamilton quaternion in the on-disk (x, y, z, w) order.
struct QuaternionXYZW {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;
};

/// Element of SE(3). Maps points from the source frame into the target frame
/// (a `world_from_base` maps base coordinates to world coordinates).
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_quaternion(const QuaternionXYZW& q, const Eigen::Vector3d& translation);
  /// Rotation about +z by `yaw` radians, then translation.
  static RigidTransform from_yaw(double yaw, const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  QuaternionXYZW quaternion() const;

  RigidTransform inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  /// ‖RᵀR − I‖∞ of the stored rotation.
  double orthonormality_error() const;

  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_};
  }

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

struct VehiclePose {
  double timestamp = 0.0;
  RigidTransform world_from_base;
};

/// Pinhole camera without distortion.
struct CameraRig {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  RigidTransform base_from_camera;

  /// Throws InputError when intrinsics violate fx, fy > 0 and the principal
  /// point lies inside the image.
  void validate() const;
};

/// Camera mounted `height` meters above the base origin, `forward` meters
/// ahead of it, looking along +x and pitched down by `pitch` radians.
RigidTransform forward_camera_mount(double height, double pitch, double forward = 0.0);

struct FootprintSpec {
  double width = 2.0;
  double length = 1.0;
  double ground_offset = 0.0;

  void validate() const;
};

/// Interpolates a trajectory with strictly increasing timestamps. Translation
/// is linear, rotation is quaternion slerp, sample times return the sample.
VehiclePose interpolate_pose(std::span<const VehiclePose> trajectory, double t);

/// Throws InputError unless timestamps are strictly increasing and there are
/// at least two poses.
void validate_trajectory(std::span<const VehiclePose> trajectory);

/// World-frame corners in the order front-left, front-right, rear-right, rear-left.
std::array<Eigen::Vector3d, 4> footprint_corners(const VehiclePose& pose, const FootprintSpec& spec);

inline constexpr double kDefaultZNear = 0.1;

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  bool valid = false;
};

/// Projects a world point. Points with camera-frame depth <= z_near are
/// reported invalid; valid projections may fall outside the image.
PixelProjection project_point(const Eigen::Vector3d& p_world, const RigidTransform& world_from_camera,
                              const CameraRig& rig, double z_near = kDefaultZNear);

/// Projection of a camera-frame point without the depth test.
Eigen::Vector2d project_camera_point(const Eigen::Vector3d& p_camera, const CameraRig& rig);

/// Sutherland-Hodgman clip of a camera-frame polygon against z >= z_near.
/// Returns an empty vector when the polygon lies entirely behind the plane.
std::vector<Eigen::Vector3d> clip_to_near_plane(std::span<const Eigen::Vector3d> polygon_camera,
                                                double z_near = kDefaultZNear);

}  // namespace trav
