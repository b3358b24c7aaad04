#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "rsplab/image.hpp"
#include "rsplab/rng.hpp"

using rsplab::img::Image8;

TEST_CASE("image: PNG write/read round trip preserves every byte") {
  rsplab::Rng rng(7);
  Image8 im = rsplab::img::make_image(23, 31);
  for (auto& px : im.pixels) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));

  const char* path = "image_roundtrip_tmp.png";
  rsplab::img::write_png(path, im);
  Image8 back = rsplab::img::read_png(path);
  std::remove(path);

  REQUIRE(back.height == im.height);
  REQUIRE(back.width == im.width);
  CHECK(back.pixels == im.pixels);
}

TEST_CASE("image: float conversion maps 0..255 onto 0..1 and back") {
  Image8 im = rsplab::img::make_image(2, 2);
  im.at(0, 0, 0) = 0;
  im.at(0, 0, 1) = 255;
  im.at(0, 0, 2) = 128;
  im.at(1, 1, 0) = 51;  // 51/255 = 0.2 exactly

  rsplab::TensorF f = rsplab::img::to_float(im);
  REQUIRE(f.shape() == std::vector<std::size_t>{3, 2, 2});
  CHECK(f[0] == doctest::Approx(0.0));           // c=0,y=0,x=0
  CHECK(f[4] == doctest::Approx(1.0));           // c=1,y=0,x=0
  CHECK(f[8] == doctest::Approx(128.0 / 255.0)); // c=2,y=0,x=0
  CHECK(f[3] == doctest::Approx(0.2));           // c=0,y=1,x=1

  Image8 back = rsplab::img::from_float(f);
  CHECK(back.pixels == im.pixels);
}

TEST_CASE("image: from_float clamps out-of-range values") {
  rsplab::TensorF f({3, 1, 1});
  f[0] = -0.5f;
  f[1] = 1.5f;
  f[2] = 0.5f;
  Image8 im = rsplab::img::from_float(f);
  CHECK(im.at(0, 0, 0) == 0);
  CHECK(im.at(0, 0, 1) == 255);
  CHECK(im.at(0, 0, 2) == 128);
}

TEST_CASE("image: errors name the offending path") {
  CHECK_THROWS_AS(rsplab::img::read_png("no_such_image_here.png"), rsplab::img::IoError);
  rsplab::TensorF bad({2, 2, 2});
  CHECK_THROWS_AS(rsplab::img::from_float(bad), rsplab::ShapeError);
}
