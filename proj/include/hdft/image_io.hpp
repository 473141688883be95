#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdft/tensor.hpp"

namespace hdft {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Images are [3,H,W] tensors with values in [0,1]. 8-bit code v maps to v/255;
// stores round half up after clamping to [0,1].
Tensor decode_ppm(const std::vector<std::uint8_t>& bytes, std::vector<std::string>* comments = nullptr);
std::vector<std::uint8_t> encode_ppm(const Tensor& img, const std::vector<std::string>& comments = {});

bool png_supported();

// Format is chosen by extension (.ppm or .png).
Tensor load_image(const std::filesystem::path& path, std::vector<std::string>* comments = nullptr);
void save_image(const Tensor& img, const std::filesystem::path& path, const std::vector<std::string>& comments = {});

std::uint8_t to_code(double v);

}  // namespace hdft
