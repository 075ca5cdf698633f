#include "trav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trav/errors.hpp"

namespace trav {

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (orthonormality_error() > 1e-6 || rotation_.determinant() < 0.0) {
    throw InputError("RigidTransform: rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::from_quaternion(const QuaternionXYZW& q, const Eigen::Vector3d& translation) {
  Eigen::Quaterniond quat(q.w, q.x, q.y, q.z);
  const double norm = quat.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw InputError("quaternion has zero or non-finite norm");
  if (std::abs(norm - 1.0) > 1e-3) throw InputError("quaternion is not unit length");
  quat.normalize();
  return {quat.toRotationMatrix(), translation};
}

RigidTransform RigidTransform::from_yaw(double yaw, const Eigen::Vector3d& translation) {
  return {Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), translation};
}

QuaternionXYZW RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return {q.x(), q.y(), q.z(), q.w()};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

double RigidTransform::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

void CameraRig::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InputError("camera principal point lies outside the image");
  }
}

RigidTransform forward_camera_mount(double height, double pitch, double forward) {
  const double c = std::cos(pitch);
  const double s = std::sin(pitch);
  // Columns are the camera axes (right, down, forward) expressed in the base frame.
  Eigen::Matrix3d r;
  r.col(0) = Eigen::Vector3d(0.0, -1.0, 0.0);
  r.col(1) = Eigen::Vector3d(-s, 0.0, -c);
  r.col(2) = Eigen::Vector3d(c, 0.0, -s);
  return {r, Eigen::Vector3d(forward, 0.0, height)};
}

void FootprintSpec::validate() const {
  if (!(width > 0.0)) throw InputError("footprint width must be positive");
  if (!(length >= 0.0)) throw InputError("footprint length must be non-negative");
}

void validate_trajectory(std::span<const VehiclePose> trajectory) {
  if (trajectory.size() < 2) throw InputError("trajectory needs at least two poses");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].timestamp > trajectory[i - 1].timestamp)) {
      std::ostringstream msg;
      msg << "trajectory timestamps not strictly increasing at index " << i;
      throw InputError(msg.str());
    }
  }
}

VehiclePose interpolate_pose(std::span<const VehiclePose> trajectory, double t) {
  if (trajectory.size() < 2) throw InputError("interpolate_pose: trajectory needs at least two poses");
  const double first = trajectory.front().timestamp;
  const double last = trajectory.back().timestamp;
  if (!(t >= first && t <= last)) {
    std::ostringstream msg;
    msg << "interpolate_pose: t=" << t << " outside [" << first << ", " << last << "]";
    throw RangeError(msg.str());
  }
  auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                             [](double value, const VehiclePose& p) { return value < p.timestamp; });
  // it points past the last sample with timestamp <= t.
  const auto hi = static_cast<std::size_t>(it - trajectory.begin());
  const std::size_t lo = hi - 1;
  if (trajectory[lo].timestamp == t || hi == trajectory.size()) {
    return trajectory[lo];
  }
  const VehiclePose& a = trajectory[lo];
  const VehiclePose& b = trajectory[hi];
  const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);

  const Eigen::Vector3d translation =
      (1.0 - alpha) * a.world_from_base.translation() + alpha * b.world_from_base.translation();
  const Eigen::Quaterniond qa(a.world_from_base.rotation());
  const Eigen::Quaterniond qb(b.world_from_base.rotation());
  const Eigen::Quaterniond q = qa.slerp(alpha, qb).normalized();
  return {t, RigidTransform(q.toRotationMatrix(), translation)};
}

std::array<Eigen::Vector3d, 4> footprint_corners(const VehiclePose& pose, const FootprintSpec& spec) {
  const double hl = 0.5 * spec.length;
  const double hw = 0.5 * spec.width;
  const double z = -spec.ground_offset;
  const std::array<Eigen::Vector3d, 4> local = {
      Eigen::Vector3d(hl, hw, z),    // front-left
      Eigen::Vector3d(hl, -hw, z),   // front-right
      Eigen::Vector3d(-hl, -hw, z),  // rear-right
      Eigen::Vector3d(-hl, hw, z),   // rear-left
  };
  std::array<Eigen::Vector3d, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = pose.world_from_base.apply(local[i]);
  return out;
}

Eigen::Vector2d project_camera_point(const Eigen::Vector3d& p, const CameraRig& rig) {
  return {rig.cx + rig.fx * p.x() / p.z(), rig.cy + rig.fy * p.y() / p.z()};
}

PixelProjection project_point(const Eigen::Vector3d& p_world, const RigidTransform& world_from_camera,
                              const CameraRig& rig, double z_near) {
  const Eigen::Vector3d p = world_from_camera.inverse().apply(p_world);
  if (!(p.z() > z_near)) return {0.0, 0.0, false};
  const Eigen::Vector2d uv = project_camera_point(p, rig);
  return {uv.x(), uv.y(), true};
}

std::vector<Eigen::Vector3d> clip_to_near_plane(std::span<const Eigen::Vector3d> polygon, double z_near) {
  std::vector<Eigen::Vector3d> out;
  const std::size_t n = polygon.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& cur = polygon[i];
    const Eigen::Vector3d& next = polygon[(i + 1) % n];
    const bool cur_in = cur.z() >= z_near;
    const bool next_in = next.z() >= z_near;
    if (cur_in) out.push_back(cur);
    if (cur_in != next_in) {
      const double s = (z_near - cur.z()) / (next.z() - cur.z());
      Eigen::Vector3d hit = cur + s * (next - cur);
      hit.z() = z_near;
      out.push_back(hit);
    }
  }
  return out;
}

}  // namespace trav
