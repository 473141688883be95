#include "hdft/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace hdft {

double psnr(const Tensor& x, const Tensor& y, double max_val) {
  require_same_shape(x.shape(), y.shape(), "psnr");
  if (x.size() == 0) throw ShapeError("psnr: empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(max_val * max_val / mse);
}

Tensor luma(const Tensor& img) {
  require_rank(img.shape(), 3, "luma");
  if (img.dim(0) == 1) return img;
  if (img.dim(0) != 3) throw ShapeError("luma: expected 1 or 3 channels, got " + shape_str(img.shape()));
  const std::size_t plane = img.dim(1) * img.dim(2);
  Tensor out({1, img.dim(1), img.dim(2)});
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = 0.299 * img[i] + 0.587 * img[plane + i] + 0.114 * img[2 * plane + i];
  }
  return out;
}

namespace {

double ssim_formula(double mx, double my, double vx, double vy, double cxy, const SsimConstants& k) {
  return ((2.0 * mx * my + k.c1()) * (2.0 * cxy + k.c2())) / ((mx * mx + my * my + k.c1()) * (vx + vy + k.c2()));
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double total = 0.0;
  const double center = (kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Separable weighted mean over the valid region of a [1,H,W] plane.
Tensor filter_valid(const Tensor& x) {
  static const auto g = gaussian_window();
  const std::size_t h = x.dim(1), w = x.dim(2), oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  Tensor rows({1, h, ow});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * x.at(0, y, c + k);
      rows.at(0, y, c) = acc;
    }
  Tensor out({1, oh, ow});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * rows.at(0, y + k, c);
      out.at(0, y, c) = acc;
    }
  return out;
}

Tensor crop_valid(const Tensor& x) {
  const std::size_t r = (kSsimWindow - 1) / 2;
  const std::size_t oh = x.dim(1) - 2 * r, ow = x.dim(2) - 2 * r;
  Tensor out({1, oh, ow});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t c = 0; c < ow; ++c) out.at(0, y, c) = x.at(0, y + r, c + r);
  return out;
}

double mean_of(const Tensor& t) { return sum(t) / static_cast<double>(t.size()); }

}  // namespace

Tensor ssim_map(const Tensor& x, const Tensor& y, const SsimConstants& k) {
  require_same_shape(x.shape(), y.shape(), "ssim");
  const auto lx = luma(x), ly = luma(y);
  if (lx.dim(1) < kSsimWindow || lx.dim(2) < kSsimWindow) {
    throw ShapeError("ssim: image " + shape_str(x.shape()) + " smaller than the 11x11 window");
  }
  const auto mx = filter_valid(lx), my = filter_valid(ly);
  const auto exx = filter_valid(lx * lx), eyy = filter_valid(ly * ly), exy = filter_valid(lx * ly);
  Tensor out(mx.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i], vy = eyy[i] - my[i] * my[i], cxy = exy[i] - mx[i] * my[i];
    out[i] = ssim_formula(mx[i], my[i], vx, vy, cxy, k);
  }
  return out;
}

double ssim(const Tensor& x, const Tensor& y, SsimMode mode, const SsimConstants& k) {
  if (mode == SsimMode::Windowed) return mean_of(ssim_map(x, y, k));
  require_same_shape(x.shape(), y.shape(), "ssim");
  const auto lx = luma(x), ly = luma(y);
  const double mx = mean_of(lx), my = mean_of(ly);
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    vx += (lx[i] - mx) * (lx[i] - mx);
    vy += (ly[i] - my) * (ly[i] - my);
    cxy += (lx[i] - mx) * (ly[i] - my);
  }
  const double n = static_cast<double>(lx.size());
  return ssim_formula(mx, my, vx / n, vy / n, cxy / n, k);
}

std::vector<Tensor> mef_weights(const std::vector<Tensor>& sources, const MefSsimConfig& cfg) {
  if (sources.empty()) throw std::invalid_argument("mef_ssim: no source images");
  if (!(cfg.beta >= 0.0)) throw std::invalid_argument("mef_ssim: beta must be nonnegative");
  std::vector<Tensor> lum;
  for (const auto& s : sources) {
    require_same_shape(s.shape(), sources.front().shape(), "mef_ssim sources");
    lum.push_back(luma(s));
  }
  const std::size_t n = lum.size(), plane = lum.front().size();
  std::vector<double> global_mean(n);
  for (std::size_t i = 0; i < n; ++i) global_mean[i] = mean_of(lum[i]);

  std::vector<Tensor> w(n, Tensor(lum.front().shape()));
  for (std::size_t p = 0; p < plane; ++p) {
    double pixel_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) pixel_mean += lum[i][p] / static_cast<double>(n);
    // Work with exponents relative to the largest one so the sum cannot underflow.
    double best = -1e300;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ref = cfg.mean == MefMean::PerPixelAcrossSources ? pixel_mean : global_mean[i];
      e[i] = -cfg.beta * (lum[i][p] - ref) * (lum[i][p] - ref);
      best = std::max(best, e[i]);
    }
    double z = 0.0;
    for (auto& v : e) z += (v = std::exp(v - best));
    for (std::size_t i = 0; i < n; ++i) w[i][p] = e[i] / z;
  }
  return w;
}

double mef_ssim(const Tensor& fused, const std::vector<Tensor>& sources, const MefSsimConfig& cfg) {
  const auto weights = mef_weights(sources, cfg);
  require_same_shape(fused.shape(), sources.front().shape(), "mef_ssim fused");
  double score = 0.0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    score += mean_of(crop_valid(weights[i]) * ssim_map(fused, sources[i], cfg.constants));
  }
  return cfg.aggregate == MefAggregate::Sum ? score : score / static_cast<double>(sources.size());
}

}  // namespace hdft
