#include "trav/image_io.hpp"

#include <png.h>

#include <cstring>

#include "trav/errors.hpp"

namespace trav {

Image8 read_png(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) throw InputError("read_png: channels must be 1 or 3");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw InputError("write_png: channels must be 1 or 3");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

Image8 encode_label_mask(const LabelMask& mask) {
  Image8 out(mask.width(), mask.height(), 1);
  auto codes = mask.codes();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    switch (codes[i]) {
      case LabelCode::Unlabeled: out.data[i] = 0; break;
      case LabelCode::Positive: out.data[i] = kMaskPositive; break;
      case LabelCode::Ignore: out.data[i] = kMaskIgnore; break;
    }
  }
  return out;
}

LabelMask decode_label_mask(const Image8& gray) {
  if (gray.channels != 1) throw InputError("decode_label_mask: expected a single-channel image");
  LabelMask mask(gray.width, gray.height);
  auto codes = mask.codes();
  for (std::size_t i = 0; i < gray.data.size(); ++i) {
    switch (gray.data[i]) {
      case 0: codes[i] = LabelCode::Unlabeled; break;
      case kMaskPositive: codes[i] = LabelCode::Positive; break;
      case kMaskIgnore: codes[i] = LabelCode::Ignore; break;
      default: throw DataError("mask contains value " + std::to_string(gray.data[i]) + " outside {0,128,255}");
    }
  }
  return mask;
}

}  // namespace trav
