#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace trav {

enum class LabelCode : std::uint8_t { Unlabeled = 0, Positive = 1, Ignore = 255 };

/// Per-pixel ternary label grid, row-major.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int width, int height, LabelCode fill = LabelCode::Unlabeled);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return codes_.size(); }

  LabelCode at(int row, int col) const { return codes_[index(row, col)]; }
  void set(int row, int col, LabelCode code) { codes_[index(row, col)] = code; }

  std::span<const LabelCode> codes() const { return codes_; }
  std::span<LabelCode> codes() { return codes_; }

  std::size_t count(LabelCode code) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<LabelCode> codes_;
};

using PixelPolygon = std::vector<Eigen::Vector2d>;

/// Point-in-polygon with the boundary counted inside (even-odd interior).
bool polygon_contains(std::span<const Eigen::Vector2d> polygon, const Eigen::Vector2d& p);

/// Marks every pixel whose center lies inside or on the boundary of any
/// polygon as positive; polygons may extend past the image.
LabelMask rasterize_quads(std::span<const PixelPolygon> polygons, int width, int height);

/// In-place variant that only raises pixels to Positive.
void rasterize_into(std::span<const Eigen::Vector2d> polygon, LabelMask& mask);

}  // namespace trav
