#pragma once

// Reference implementations used only by tests. They favor the plainest
// possible formulation over speed and share no code with the library.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trav/geometry.hpp"
#include "trav/raster.hpp"

namespace trav::oracle {

/// Winding-number containment with points on any edge counted inside.
bool inside_polygon(std::span<const Eigen::Vector2d> polygon, const Eigen::Vector2d& p);

/// Pixel-center test against every polygon.
LabelMask brute_force_mask(std::span<const PixelPolygon> polygons, int width, int height);

/// Sinkhorn fixed point by plain alternating scaling until the update is
/// below `tol` (long double throughout).
Eigen::MatrixXd sinkhorn_fixed_point(const Eigen::MatrixXd& scores, double epsilon, double tol = 1e-12);

/// Mann-Whitney statistic by enumerating every positive/negative pair.
double auroc_pairs(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct SweepPoint {
  double threshold;
  double precision;
  double recall;
  double f1;
};

/// Every distinct score as a threshold, each counted from scratch, highest first.
std::vector<SweepPoint> threshold_sweep(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Ground rectangle x in [x0, x1], y in [-w/2, w/2] (base frame of `pose`)
/// rendered by projecting a dense grid of ground points: a pixel is marked
/// when at least half of the grid points landing in it lie in the rectangle.
LabelMask dense_ground_rectangle(const VehiclePose& pose, const CameraRig& rig, double x0, double x1, double width,
                                 double spacing = 0.005);

/// Ray-cast ground hit of a pixel center; false for rays at or above the horizon.
bool pixel_ground_hit(const RigidTransform& world_from_camera, const CameraRig& rig, double u, double v,
                      Eigen::Vector3d& hit);

/// Central finite differences of f at x, one coordinate at a time.
template <typename F>
Eigen::VectorXd numeric_gradient(F&& f, Eigen::VectorXd x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), or 0 when both vanish.
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace trav::oracle
