#include "trav/raster.hpp"

#include <algorithm>
#include <cmath>

#include "trav/errors.hpp"

namespace trav {

LabelMask::LabelMask(int width, int height, LabelCode fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InputError("LabelMask: negative size");
  codes_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

std::size_t LabelMask::count(LabelCode code) const {
  return static_cast<std::size_t>(std::count(codes_.begin(), codes_.end(), code));
}

namespace {

bool on_segment(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p) {
  const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  if (cross != 0.0) return false;
  return p.x() >= std::min(a.x(), b.x()) && p.x() <= std::max(a.x(), b.x()) &&
         p.y() >= std::min(a.y(), b.y()) && p.y() <= std::max(a.y(), b.y());
}

double crossing_x(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double y) {
  return a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
}

// Pixel index of a coordinate, clamped far outside any image so the cast is defined.
int pixel_floor(double v) { return static_cast<int>(std::floor(std::clamp(v, -1e8, 1e8))); }
int pixel_ceil(double v) { return static_cast<int>(std::ceil(std::clamp(v, -1e8, 1e8))); }

}  // namespace

bool polygon_contains(std::span<const Eigen::Vector2d> polygon, const Eigen::Vector2d& p) {
  const std::size_t n = polygon.size();
  if (n == 0) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d& a = polygon[j];
    const Eigen::Vector2d& b = polygon[i];
    if (on_segment(a, b, p)) return true;
    if ((a.y() <= p.y()) != (b.y() <= p.y())) {
      if (p.x() < crossing_x(a, b, p.y())) inside = !inside;
    }
  }
  return inside;
}

void rasterize_into(std::span<const Eigen::Vector2d> polygon, LabelMask& mask) {
  const std::size_t n = polygon.size();
  if (n == 0) return;
  double ymin = polygon[0].y();
  double ymax = ymin;
  for (const auto& p : polygon) {
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) throw InputError("rasterize: non-finite vertex");
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int width = mask.width();
  const int row_begin = std::max(0, pixel_floor(ymin - 0.5));
  const int row_end = std::min(mask.height() - 1, pixel_ceil(ymax - 0.5));

  std::vector<double> crossings;
  crossings.reserve(n);
  // Pixels within this distance of an edge are decided by the exact predicate.
  auto exact_test = [&](int row, int col) {
    if (col < 0 || col >= width) return;
    if (mask.at(row, col) == LabelCode::Positive) return;
    if (polygon_contains(polygon, Eigen::Vector2d(col + 0.5, row + 0.5))) mask.set(row, col, LabelCode::Positive);
  };

  for (int row = row_begin; row <= row_end; ++row) {
    const double yc = row + 0.5;
    if (yc < ymin || yc > ymax) continue;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Eigen::Vector2d& a = polygon[j];
      const Eigen::Vector2d& b = polygon[i];
      const double lo = std::min(a.y(), b.y());
      const double hi = std::max(a.y(), b.y());
      if (yc < lo || yc > hi) continue;
      if (a.y() == b.y()) {
        // Horizontal edge on this scanline: boundary pixels along its span.
        const int c0 = pixel_floor(std::min(a.x(), b.x()) - 0.5);
        const int c1 = pixel_ceil(std::max(a.x(), b.x()) - 0.5);
        for (int c = std::max(c0, -1); c <= std::min(c1, width); ++c) exact_test(row, c);
        continue;
      }
      const double x = crossing_x(a, b, yc);
      const int c = pixel_floor(x - 0.5);
      for (int k = c - 1; k <= c + 2; ++k) exact_test(row, k);
      if ((a.y() <= yc) != (b.y() <= yc)) crossings.push_back(x);
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Columns between the exact-tested neighborhoods of the two crossings.
      const int c0 = std::max(0, pixel_floor(crossings[k] - 0.5) + 3);
      const int c1 = std::min(width - 1, pixel_floor(crossings[k + 1] - 0.5) - 2);
      for (int c = c0; c <= c1; ++c) mask.set(row, c, LabelCode::Positive);
    }
  }
}

LabelMask rasterize_quads(std::span<const PixelPolygon> polygons, int width, int height) {
  LabelMask mask(width, height);
  for (const auto& polygon : polygons) rasterize_into(polygon, mask);
  return mask;
}

}  // namespace trav
