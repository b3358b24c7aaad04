#include "rsplab/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace rsplab::img {

Image8 make_image(int height, int width, std::uint8_t fill) {
  Image8 im;
  im.height = height;
  im.width = width;
  im.pixels.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3, fill);
  return im;
}

Image8 read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError("cannot read PNG '" + path + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image8 im = make_image(static_cast<int>(png.height), static_cast<int>(png.width));
  if (!png_image_finish_read(&png, nullptr, im.pixels.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG '" + path + "': " + msg);
  }
  return im;
}

void write_png(const std::string& path, const Image8& image) {
  if (image.height <= 0 || image.width <= 0 ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width) * 3) {
    throw IoError("write_png '" + path + "': inconsistent image dimensions");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path + "': " + png.message);
  }
}

TensorF to_float(const Image8& image) {
  TensorF out({3, static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width)});
  const std::size_t plane = static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width);
  float* dst = out.data();
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y * image.width + x);
      for (int c = 0; c < 3; ++c) {
        dst[static_cast<std::size_t>(c) * plane + p] =
            static_cast<float>(image.at(y, x, c)) / 255.0f;
      }
    }
  }
  return out;
}

Image8 from_float(const TensorF& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw ShapeError("from_float: expected [3,H,W], got " + chw.shape_str());
  }
  const int h = static_cast<int>(chw.dim(1));
  const int w = static_cast<int>(chw.dim(2));
  Image8 im = make_image(h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const float* src = chw.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y * w + x);
      for (int c = 0; c < 3; ++c) {
        float v = src[static_cast<std::size_t>(c) * plane + p];
        v = std::clamp(v, 0.0f, 1.0f);
        im.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return im;
}

}  // namespace rsplab::img
