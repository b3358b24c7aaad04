#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsplab/tensor.hpp"

namespace rsplab::img {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit RGB image, row-major, interleaved (H x W x 3).
struct Image8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // size = height * width * 3

  std::uint8_t& at(int y, int x, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

Image8 make_image(int height, int width, std::uint8_t fill = 0);

// PNG round trip; any libpng failure raises IoError naming the path.
Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& image);

// Planar float conversion: [3, H, W] with values in [0, 1].
TensorF to_float(const Image8& image);
// Clamps to [0, 1] and quantizes back to 8-bit.
Image8 from_float(const TensorF& chw);

}  // namespace rsplab::img
