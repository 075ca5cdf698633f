#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "trav/objectives.hpp"
#include "trav/rng.hpp"

namespace trav {

struct AugmentConfig {
  double scale_min = 0.4;  // crop area fraction
  double scale_max = 1.0;
  double flip_probability = 0.5;
  double jitter = 0.4;  // brightness / contrast / saturation factors in [1 - j, 1 + j]
};

/// Geometry and photometric parameters of one augmented view. The crop is in
/// continuous source-image pixel coordinates and is resized to the full image.
struct AugmentationParams {
  double crop_x = 0.0;
  double crop_y = 0.0;
  double crop_width = 0.0;
  double crop_height = 0.0;
  bool flip = false;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  std::uint64_t seed = 0;

  static AugmentationParams identity(int width, int height);
  /// Throws InputError unless the crop lies inside a width x height image.
  void validate(int width, int height) const;
};

/// Draws a crop with the image aspect ratio and area fraction in
/// [scale_min, scale_max], a flip and jitter factors.
AugmentationParams sample_augmentation(Rng& rng, int width, int height, const AugmentConfig& config);

/// Source-image location of a view-image location.
Eigen::Vector2d view_to_source(const AugmentationParams& params, int width, int height, const Eigen::Vector2d& view);
Eigen::Vector2d source_to_view(const AugmentationParams& params, int width, int height, const Eigen::Vector2d& source);

/// Renders a view of a 3 x (H * W) image tensor (bilinear resampling, then
/// brightness, contrast and saturation jitter, clamped to [0, 1]).
template <typename S>
RowMatrix<S> apply_augmentation(const RowMatrix<S>& image, int width, int height, const AugmentationParams& params);

struct PixelPairs {
  std::vector<int> first;   // cell index in view 1 (row * grid_width + col)
  std::vector<int> second;  // matching cell index in view 2
  std::size_t size() const { return first.size(); }
};

/// Output-stride cells of two views of the same frame whose source locations
/// coincide within half a stride cell. Each cell is used at most once; the
/// closest match wins and ties go to the lower view-1 index.
PixelPairs pixel_correspondence(const AugmentationParams& view1, const AugmentationParams& view2, int width,
                                int height, int stride);

}  // namespace trav
