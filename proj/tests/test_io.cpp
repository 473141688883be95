#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hdft/image_io.hpp"
#include "oracles.hpp"

using namespace hdft;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, std::vector<std::uint8_t> pixels) {
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

TEST_CASE("decode a 2x2 binary ppm") {
  const auto img = decode_ppm(bytes_of("P6\n2 2\n255\n", {255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 102, 153}));
  REQUIRE(img.shape() == Shape{3, 2, 2});
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(1, 0, 1) == 1.0);
  CHECK(img.at(2, 1, 0) == 1.0);
  CHECK(img.at(0, 1, 1) == doctest::Approx(0.2));
  CHECK(img.at(1, 1, 1) == doctest::Approx(0.4));
  CHECK(img.at(2, 1, 1) == doctest::Approx(0.6));
  CHECK(img.at(1, 0, 0) == 0.0);
}

TEST_CASE("ppm round trip error is at most half a code") {
  const auto img = oracle::random_tensor({3, 5, 7}, 11, 0.0, 1.0);
  const auto back = decode_ppm(encode_ppm(img));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 1.0 / 510.0 + 1e-12);
  CHECK(decode_ppm(encode_ppm(back)) == back);
}

TEST_CASE("ppm comments carry metadata") {
  const auto img = oracle::random_tensor({3, 2, 3}, 12, 0.0, 1.0);
  const auto bytes = encode_ppm(img, {"level=2", "offset=0.5"});
  std::vector<std::string> comments;
  (void)decode_ppm(bytes, &comments);
  CHECK(comments == std::vector<std::string>{"level=2", "offset=0.5"});
}

TEST_CASE("encoding clamps and rounds") {
  CHECK(to_code(-0.3) == 0);
  CHECK(to_code(1.7) == 255);
  CHECK(to_code(0.5) == 128);
  CHECK(to_code(std::nan("")) == 0);
}

TEST_CASE("malformed ppm files are rejected") {
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n65535\n", std::vector<std::uint8_t>(24))), ImageError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n255\n", std::vector<std::uint8_t>(11))), ImageError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P3\n2 2\n255\n", std::vector<std::uint8_t>(12))), ImageError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n0 2\n255\n", {})), ImageError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2", {})), ImageError);
}

TEST_CASE("file round trips") {
  const auto img = oracle::random_tensor({3, 6, 4}, 13, 0.0, 1.0);
  const auto dir = std::filesystem::temp_directory_path();
  const auto ppm = dir / "hdft_test_io.ppm";
  save_image(img, ppm);
  const auto a = load_image(ppm);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(a[i] - img[i]) <= 1.0 / 510.0 + 1e-12);
  std::filesystem::remove(ppm);

  if (png_supported()) {
    const auto png = dir / "hdft_test_io.png";
    save_image(img, png);
    CHECK(load_image(png) == a);
    std::filesystem::remove(png);
  }
  CHECK_THROWS_AS(save_image(img, dir / "hdft_test_io.bmp"), ImageError);
  CHECK_THROWS(load_image(dir / "hdft_test_missing.ppm"));
}
