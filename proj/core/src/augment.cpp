#include "trav/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trav/errors.hpp"

namespace trav {

AugmentationParams AugmentationParams::identity(int width, int height) {
  AugmentationParams p;
  p.crop_width = width;
  p.crop_height = height;
  return p;
}

void AugmentationParams::validate(int width, int height) const {
  constexpr double kSlack = 1e-9;
  if (!(crop_width > 0.0) || !(crop_height > 0.0) || crop_x < -kSlack || crop_y < -kSlack ||
      crop_x + crop_width > width + kSlack || crop_y + crop_height > height + kSlack) {
    throw InputError("augmentation crop lies outside the image");
  }
}

AugmentationParams sample_augmentation(Rng& rng, int width, int height, const AugmentConfig& config) {
  AugmentationParams p;
  const double scale = rng.uniform(config.scale_min, config.scale_max);
  const double side = std::sqrt(scale);
  p.crop_width = side * width;
  p.crop_height = side * height;
  p.crop_x = rng.uniform(0.0, width - p.crop_width);
  p.crop_y = rng.uniform(0.0, height - p.crop_height);
  p.flip = rng.bernoulli(config.flip_probability);
  p.brightness = rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);
  p.contrast = rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);
  p.saturation = rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);
  p.seed = rng.next_u64();
  return p;
}

Eigen::Vector2d view_to_source(const AugmentationParams& p, int width, int height, const Eigen::Vector2d& view) {
  const double xv = p.flip ? width - view.x() : view.x();
  return {p.crop_x + xv * p.crop_width / width, p.crop_y + view.y() * p.crop_height / height};
}

Eigen::Vector2d source_to_view(const AugmentationParams& p, int width, int height, const Eigen::Vector2d& source) {
  double xv = (source.x() - p.crop_x) * width / p.crop_width;
  if (p.flip) xv = width - xv;
  return {xv, (source.y() - p.crop_y) * height / p.crop_height};
}

template <typename S>
RowMatrix<S> apply_augmentation(const RowMatrix<S>& image, int width, int height, const AugmentationParams& p) {
  if (image.rows() != 3 || image.cols() != static_cast<Eigen::Index>(width) * height) {
    throw InputError("apply_augmentation: image shape mismatch");
  }
  p.validate(width, height);
  RowMatrix<S> out(3, image.cols());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d src = view_to_source(p, width, height, {x + 0.5, y + 0.5});
      const double fx = std::clamp(src.x() - 0.5, 0.0, static_cast<double>(width - 1));
      const double fy = std::clamp(src.y() - 0.5, 0.0, static_cast<double>(height - 1));
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, width - 1);
      const int y1 = std::min(y0 + 1, height - 1);
      const S ax = static_cast<S>(fx - x0);
      const S ay = static_cast<S>(fy - y0);
      const Eigen::Index dst = static_cast<Eigen::Index>(y) * width + x;
      for (int c = 0; c < 3; ++c) {
        const S top = (1 - ax) * image(c, y0 * width + x0) + ax * image(c, y0 * width + x1);
        const S bottom = (1 - ax) * image(c, y1 * width + x0) + ax * image(c, y1 * width + x1);
        out(c, dst) = (1 - ay) * top + ay * bottom;
      }
    }
  }
  out *= static_cast<S>(p.brightness);
  const RowMatrix<S> gray = (S(0.299) * out.row(0) + S(0.587) * out.row(1) + S(0.114) * out.row(2));
  const S mean_gray = gray.mean();
  out = ((out.array() - mean_gray) * static_cast<S>(p.contrast) + mean_gray).matrix();
  const RowMatrix<S> gray2 = (S(0.299) * out.row(0) + S(0.587) * out.row(1) + S(0.114) * out.row(2));
  for (int c = 0; c < 3; ++c) {
    out.row(c) = gray2 + (out.row(c) - gray2) * static_cast<S>(p.saturation);
  }
  return out.cwiseMax(S(0)).cwiseMin(S(1));
}

PixelPairs pixel_correspondence(const AugmentationParams& view1, const AugmentationParams& view2, int width,
                                int height, int stride) {
  const int gw = width / stride;
  const int gh = height / stride;
  const double tolerance = 0.5 * stride;
  const std::size_t cells = static_cast<std::size_t>(gw) * gh;
  std::vector<int> best_first(cells, -1);
  std::vector<double> best_dist(cells, std::numeric_limits<double>::infinity());
  for (int i = 0; i < gh; ++i) {
    for (int j = 0; j < gw; ++j) {
      const Eigen::Vector2d src = view_to_source(view1, width, height, {(j + 0.5) * stride, (i + 0.5) * stride});
      const Eigen::Vector2d v2 = source_to_view(view2, width, height, src);
      const int j2 = static_cast<int>(std::floor(v2.x() / stride));
      const int i2 = static_cast<int>(std::floor(v2.y() / stride));
      if (v2.x() < 0.0 || v2.y() < 0.0 || j2 >= gw || i2 >= gh) continue;
      const Eigen::Vector2d src2 =
          view_to_source(view2, width, height, {(j2 + 0.5) * stride, (i2 + 0.5) * stride});
      const double dist = (src2 - src).cwiseAbs().maxCoeff();
      if (dist > tolerance) continue;
      const std::size_t k = static_cast<std::size_t>(i2) * gw + j2;
      if (dist < best_dist[k]) {
        best_dist[k] = dist;
        best_first[k] = i * gw + j;
      }
    }
  }
  PixelPairs pairs;
  std::vector<std::pair<int, int>> ordered;
  for (std::size_t k = 0; k < cells; ++k) {
    if (best_first[k] >= 0) ordered.emplace_back(best_first[k], static_cast<int>(k));
  }
  std::sort(ordered.begin(), ordered.end());
  for (const auto& [a, b] : ordered) {
    pairs.first.push_back(a);
    pairs.second.push_back(b);
  }
  return pairs;
}

template RowMatrix<float> apply_augmentation<float>(const RowMatrix<float>&, int, int, const AugmentationParams&);
template RowMatrix<double> apply_augmentation<double>(const RowMatrix<double>&, int, int, const AugmentationParams&);

}  // namespace trav
