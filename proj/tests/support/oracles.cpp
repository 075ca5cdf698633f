#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace trav::oracle {

namespace {

bool on_edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  if (cross != 0.0) return false;
  return p.x() >= std::min(a.x(), b.x()) && p.x() <= std::max(a.x(), b.x()) && p.y() >= std::min(a.y(), b.y()) &&
         p.y() <= std::max(a.y(), b.y());
}

double is_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
}

}  // namespace

bool inside_polygon(std::span<const Eigen::Vector2d> polygon, const Eigen::Vector2d& p) {
  const std::size_t n = polygon.size();
  if (n == 0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (on_edge(polygon[i], polygon[(i + 1) % n], p)) return true;
  }
  int winding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[(i + 1) % n];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && is_left(a, b, p) > 0) ++winding;
    } else {
      if (b.y() <= p.y() && is_left(a, b, p) < 0) --winding;
    }
  }
  return winding != 0;
}

LabelMask brute_force_mask(std::span<const PixelPolygon> polygons, int width, int height) {
  LabelMask mask(width, height);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Eigen::Vector2d center(col + 0.5, row + 0.5);
      for (const auto& poly : polygons) {
        if (inside_polygon(poly, center)) {
          mask.set(row, col, LabelCode::Positive);
          break;
        }
      }
    }
  }
  return mask;
}

Eigen::MatrixXd sinkhorn_fixed_point(const Eigen::MatrixXd& scores, double epsilon, double tol) {
  using LD = long double;
  const Eigen::Index b = scores.rows();
  const Eigen::Index k = scores.cols();
  std::vector<std::vector<LD>> kernel(b, std::vector<LD>(k));
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) kernel[i][j] = std::exp(static_cast<LD>(scores(i, j)) / epsilon);
  }
  std::vector<LD> u(b, 1.0L);
  std::vector<LD> v(k, 1.0L);
  const LD col_target = static_cast<LD>(b) / static_cast<LD>(k);
  for (int iter = 0; iter < 1000000; ++iter) {
    LD change = 0.0L;
    for (Eigen::Index j = 0; j < k; ++j) {
      LD s = 0.0L;
      for (Eigen::Index i = 0; i < b; ++i) s += u[i] * kernel[i][j];
      const LD nv = col_target / s;
      change = std::max(change, std::abs(nv - v[j]) / nv);
      v[j] = nv;
    }
    for (Eigen::Index i = 0; i < b; ++i) {
      LD s = 0.0L;
      for (Eigen::Index j = 0; j < k; ++j) s += kernel[i][j] * v[j];
      const LD nu = 1.0L / s;
      change = std::max(change, std::abs(nu - u[i]) / nu);
      u[i] = nu;
    }
    if (change < tol) break;
  }
  Eigen::MatrixXd q(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) q(i, j) = static_cast<double>(u[i] * kernel[i][j] * v[j]);
  }
  return q;
}

double auroc_pairs(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

std::vector<SweepPoint> threshold_sweep(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  std::int64_t positives = 0;
  for (auto t : truth) positives += t;
  std::vector<SweepPoint> out;
  for (double th : thresholds) {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) (truth[i] ? tp : fp) += 1;
    }
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(positives);
    out.push_back({th, p, r, tp == 0 ? 0.0 : 2.0 * p * r / (p + r)});
  }
  return out;
}

bool pixel_ground_hit(const RigidTransform& world_from_camera, const CameraRig& rig, double u, double v,
                      Eigen::Vector3d& hit) {
  const Eigen::Vector3d dir = world_from_camera.rotation() * Eigen::Vector3d((u - rig.cx) / rig.fx, (v - rig.cy) / rig.fy, 1.0);
  const Eigen::Vector3d origin = world_from_camera.translation();
  if (!(dir.z() < 0.0)) return false;
  hit = origin + (-origin.z() / dir.z()) * dir;
  return true;
}

LabelMask dense_ground_rectangle(const VehiclePose& pose, const CameraRig& rig, double x0, double x1, double width,
                                 double spacing) {
  const RigidTransform camera_from_world = (pose.world_from_base * rig.base_from_camera).inverse();
  const double margin = 2.0;
  std::vector<std::int64_t> in(static_cast<std::size_t>(rig.width) * rig.height, 0);
  std::vector<std::int64_t> all(in.size(), 0);
  const auto nx = static_cast<long>(std::ceil((x1 - x0 + 2 * margin) / spacing));
  const auto ny = static_cast<long>(std::ceil((width + 2 * margin) / spacing));
  for (long i = 0; i <= nx; ++i) {
    const double x = x0 - margin + i * spacing;
    for (long j = 0; j <= ny; ++j) {
      const double y = -width / 2 - margin + j * spacing;
      const Eigen::Vector3d c = camera_from_world.apply(pose.world_from_base.apply({x, y, 0.0}));
      if (c.z() <= 1e-6) continue;
      const double u = rig.cx + rig.fx * c.x() / c.z();
      const double v = rig.cy + rig.fy * c.y() / c.z();
      if (u < 0 || v < 0 || u >= rig.width || v >= rig.height) continue;
      const std::size_t k = static_cast<std::size_t>(std::floor(v)) * rig.width + static_cast<std::size_t>(std::floor(u));
      all[k] += 1;
      if (x >= x0 && x <= x1 && std::abs(y) <= width / 2) in[k] += 1;
    }
  }
  LabelMask mask(rig.width, rig.height);
  for (int row = 0; row < rig.height; ++row) {
    for (int col = 0; col < rig.width; ++col) {
      const std::size_t k = static_cast<std::size_t>(row) * rig.width + col;
      if (all[k] > 0 && 2 * in[k] >= all[k]) mask.set(row, col, LabelCode::Positive);
    }
  }
  return mask;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

}  // namespace trav::oracle
