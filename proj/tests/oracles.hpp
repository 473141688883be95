#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's FFT or convolution code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "hdft/tensor.hpp"

namespace oracle {

using hdft::Complex;
using hdft::ComplexTensor;
using hdft::Shape;
using hdft::Tensor;

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

inline ComplexTensor random_complex(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ComplexTensor t(std::move(shape));
  for (auto& v : t.vec()) v = Complex(dist(rng), dist(rng));
  return t;
}

// O(N^2) 2D DFT over the last two axes. sign = -1 forward, +1 inverse (unscaled).
inline ComplexTensor direct_dft2(const ComplexTensor& x, int sign) {
  const auto& s = x.shape();
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  const std::size_t batch = x.size() / (h * w);
  ComplexTensor out(s);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t u = 0; u < h; ++u) {
      for (std::size_t v = 0; v < w; ++v) {
        Complex acc{};
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            const double ang = sign * 2.0 * std::numbers::pi *
                               (static_cast<double>((u * r) % h) / h + static_cast<double>((v * c) % w) / w);
            acc += x[b * h * w + r * w + c] * std::polar(1.0, ang);
          }
        }
        out[b * h * w + u * w + v] = acc;
      }
    }
  }
  return out;
}

// Circular 2D convolution by direct summation: y[h,w] = sum q[a,b] k[h-a, w-b].
inline Tensor circular_convolve(const Tensor& q, const Tensor& k) {
  const std::size_t c = q.dim(0), h = q.dim(1), w = q.dim(2);
  Tensor out(q.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t a = 0; a < h; ++a)
          for (std::size_t b = 0; b < w; ++b)
            acc += q.at(ch, a, b) * k.at(ch, (y + h - a) % h, (x + w - b) % w);
        out.at(ch, y, x) = acc;
      }
  return out;
}

// Quadruple-loop cross-correlation with same padding and given stride.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& k, std::size_t stride, bool replicate) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + stride - 1) / stride, ow = (w + stride - 1) / stride;
  const long py = static_cast<long>(kh - 1) / 2, px = static_cast<long>(kw - 1) / 2;
  Tensor out({cout, oh, ow});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) {
              long y = static_cast<long>(oy * stride + a) - py;
              long xx = static_cast<long>(ox * stride + b) - px;
              if (replicate) {
                y = std::clamp(y, 0L, static_cast<long>(h) - 1);
                xx = std::clamp(xx, 0L, static_cast<long>(w) - 1);
              } else if (y < 0 || xx < 0 || y >= static_cast<long>(h) || xx >= static_cast<long>(w)) {
                continue;
              }
              acc += k[((co * cin + ci) * kh + a) * kw + b] * x.at(ci, static_cast<std::size_t>(y), static_cast<std::size_t>(xx));
            }
        out.at(co, oy, ox) = acc;
      }
  return out;
}

}  // namespace oracle
