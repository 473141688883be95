#pragma once

#include <limits>
#include <vector>

#include "hdft/tensor.hpp"

namespace hdft {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(max_val^2 / mse); kPsnrIdentical when the images are equal.
double psnr(const Tensor& x, const Tensor& y, double max_val = 1.0);

struct SsimConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;

  double c1() const { return (k1 * range) * (k1 * range); }
  double c2() const { return (k2 * range) * (k2 * range); }
};

enum class SsimMode { Global, Windowed };

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// [3,H,W] RGB to [1,H,W] with Rec.601 weights; a [1,H,W] input is returned as is.
Tensor luma(const Tensor& img);

double ssim(const Tensor& x, const Tensor& y, SsimMode mode = SsimMode::Windowed, const SsimConstants& k = {});
// Per-pixel SSIM over the valid region: [1, H-10, W-10] for the 11x11 window.
Tensor ssim_map(const Tensor& x, const Tensor& y, const SsimConstants& k = {});

enum class MefMean { PerPixelAcrossSources, PerSourceGlobal };
enum class MefAggregate { Sum, Mean };

struct MefSsimConfig {
  double beta = 1.0;
  MefMean mean = MefMean::PerPixelAcrossSources;
  MefAggregate aggregate = MefAggregate::Sum;
  SsimConstants constants;
};

// Per-source weight maps [1,H,W] on luma; they sum to 1 at every pixel.
std::vector<Tensor> mef_weights(const std::vector<Tensor>& sources, const MefSsimConfig& cfg = {});
double mef_ssim(const Tensor& fused, const std::vector<Tensor>& sources, const MefSsimConfig& cfg = {});

}  // namespace hdft
