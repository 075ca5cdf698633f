#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trav/raster.hpp"

namespace trav {

/// 8-bit image, row-major, interleaved channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int w, int h, int c) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, 0) {}

  std::uint8_t& at(int row, int col, int ch = 0) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint8_t at(int row, int col, int ch = 0) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

/// Reads a PNG converting to the requested channel count (1 = gray, 3 = RGB).
Image8 read_png(const std::filesystem::path& path, int channels);
void write_png(const std::filesystem::path& path, const Image8& image);

/// Mask file encoding: 0 unlabeled/negative, 128 positive, 255 ignore.
inline constexpr std::uint8_t kMaskPositive = 128;
inline constexpr std::uint8_t kMaskIgnore = 255;

Image8 encode_label_mask(const LabelMask& mask);
LabelMask decode_label_mask(const Image8& gray);

}  // namespace trav
