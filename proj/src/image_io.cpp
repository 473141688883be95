#include "hdft/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#ifdef HDFT_WITH_PNG
#include <png.h>
#endif

namespace hdft {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ImageError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ImageError("write failed: " + path.string());
}

std::string lower_ext(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void check_image(const Tensor& img) {
  if (img.shape().size() != 3 || img.dim(0) != 3 || img.dim(1) == 0 || img.dim(2) == 0) {
    throw ImageError("expected a non-empty [3,H,W] image, got " + shape_str(img.shape()));
  }
}

// Header tokens are separated by whitespace; '#' starts a comment that runs to
// the end of the line.
class HeaderParser {
 public:
  HeaderParser(const std::vector<std::uint8_t>& b, std::vector<std::string>* comments) : b_(b), comments_(comments) {}

  std::string token() {
    skip();
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_]) && b_[pos_] != '#') t.push_back(static_cast<char>(b_[pos_++]));
    if (t.empty()) throw ImageError("PPM header truncated");
    return t;
  }

  std::size_t number() {
    const auto t = token();
    if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }) || t.size() > 9) {
      throw ImageError("PPM header: bad number '" + t + "'");
    }
    return std::stoul(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw ImageError("PPM header truncated");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        std::string c;
        ++pos_;
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') c.push_back(static_cast<char>(b_[pos_++]));
        if (comments_) {
          const auto start = c.find_first_not_of(' ');
          comments_->push_back(start == std::string::npos ? "" : c.substr(start));
        }
      } else {
        return;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
  std::vector<std::string>* comments_;
  std::size_t pos_ = 0;
};

#ifdef HDFT_WITH_PNG

Tensor load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  const auto bytes = read_file(path);
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raster.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageError("PNG decode failed for " + path.string() + ": " + image.message);
  }
  const std::size_t h = image.height, w = image.width;
  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = raster[(y * w + x) * 3 + c] / 255.0;
  return img;
}

void save_png(const Tensor& img, const std::filesystem::path& path) {
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::vector<std::uint8_t> raster(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) raster[(y * w + x) * 3 + c] = to_code(img.at(c, y, x));
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, raster.data(), 0, nullptr)) {
    throw ImageError("PNG encode failed for " + path.string() + ": " + image.message);
  }
}

#endif

}  // namespace

std::uint8_t to_code(double v) {
  if (std::isnan(v)) return 0;
  const double c = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::floor(c + 0.5));
}

Tensor decode_ppm(const std::vector<std::uint8_t>& bytes, std::vector<std::string>* comments) {
  HeaderParser p(bytes, comments);
  const auto magic = p.token();
  if (magic != "P6") throw ImageError("unsupported image format '" + magic + "' (only binary PPM P6)");
  const std::size_t w = p.number(), h = p.number(), maxval = p.number();
  if (w == 0 || h == 0) throw ImageError("PPM has zero width or height");
  if (maxval != 255) throw ImageError("unsupported PPM maxval " + std::to_string(maxval) + " (only 255)");
  const std::size_t start = p.raster_start();
  if (bytes.size() - start < w * h * 3) throw ImageError("PPM raster truncated");
  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = bytes[start + (y * w + x) * 3 + c] / 255.0;
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Tensor& img, const std::vector<std::string>& comments) {
  check_image(img);
  const std::size_t h = img.dim(1), w = img.dim(2);
  std::string header = "P6\n";
  for (const auto& c : comments) {
    if (c.find_first_of("\r\n") != std::string::npos) throw ImageError("PPM comments must be single lines");
    header += "# " + c + "\n";
  }
  header += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.push_back(to_code(img.at(c, y, x)));
  return out;
}

bool png_supported() {
#ifdef HDFT_WITH_PNG
  return true;
#else
  return false;
#endif
}

Tensor load_image(const std::filesystem::path& path, std::vector<std::string>* comments) {
  const auto ext = lower_ext(path);
  if (ext == ".ppm") return decode_ppm(read_file(path), comments);
#ifdef HDFT_WITH_PNG
  if (ext == ".png") return load_png(path);
#endif
  throw ImageError("unsupported image format: " + path.string());
}

void save_image(const Tensor& img, const std::filesystem::path& path, const std::vector<std::string>& comments) {
  check_image(img);
  const auto ext = lower_ext(path);
  if (ext == ".ppm") return write_file(path, encode_ppm(img, comments));
#ifdef HDFT_WITH_PNG
  if (ext == ".png") return save_png(img, path);
#endif
  throw ImageError("unsupported image format: " + path.string());
}

}  // namespace hdft
