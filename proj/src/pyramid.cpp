#include "hdft/pyramid.hpp"

#include <array>
#include <cmath>

namespace hdft {

namespace {

constexpr std::array<double, 5> kTaps = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

std::size_t border_index(std::ptrdiff_t i, std::size_t n, Border border) {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (border == Border::Replicate || n == 1) return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last));
  // Reflect about the edge samples without repeating them; fold until in range.
  while (i < 0 || i > last) {
    if (i < 0) i = -i;
    if (i > last) i = 2 * last - i;
  }
  return static_cast<std::size_t>(i);
}

// One 1D pass along rows (axis 2) or columns (axis 1). With adjoint set, the
// transpose of the same linear map is applied.
Tensor blur_pass(const Tensor& x, int axis, Border border, bool adjoint) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out(x.shape());
  const std::size_t n = axis == 1 ? h : w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::size_t pos = axis == 1 ? y : xx;
        std::array<double*, 5> adj_dst{};
        std::array<double, 5> v{};
        for (std::size_t k = 0; k < 5; ++k) {
          const std::size_t src = border_index(static_cast<std::ptrdiff_t>(pos + k) - 2, n, border);
          const std::size_t sy = axis == 1 ? src : y;
          const std::size_t sx = axis == 1 ? xx : src;
          if (adjoint) {
            adj_dst[k] = &out.at(ch, sy, sx);
          } else {
            v[k] = x.at(ch, sy, sx);
          }
        }
        if (adjoint) {
          const double g = x.at(ch, y, xx);
          for (std::size_t k = 0; k < 5; ++k) *adj_dst[k] += kTaps[k] * g;
          continue;
        }
        // Center plus weighted differences: exact for constant input.
        const double mid = v[2];
        out.at(ch, y, xx) = mid + (((v[0] - mid) + (v[4] - mid)) + 4.0 * ((v[1] - mid) + (v[3] - mid))) / 16.0;
      }
    }
  }
  return out;
}

void check_up_target(const Shape& in, std::size_t out_h, std::size_t out_w) {
  require_rank(in, 3, "pyr_up");
  const bool ok_h = out_h == 2 * in[1] || out_h + 1 == 2 * in[1];
  const bool ok_w = out_w == 2 * in[2] || out_w + 1 == 2 * in[2];
  if (!ok_h || !ok_w) {
    throw ShapeError("pyr_up: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " incompatible with " + shape_str(in));
  }
}

}  // namespace

Tensor gaussian_blur(const Tensor& x, Border border) {
  require_rank(x.shape(), 3, "gaussian_blur");
  auto out = blur_pass(blur_pass(x, 2, border, false), 1, border, false);
  round_to_precision(out);
  return out;
}

Tensor gaussian_blur_adjoint(const Tensor& g, Border border) {
  require_rank(g.shape(), 3, "gaussian_blur_adjoint");
  auto out = blur_pass(blur_pass(g, 1, border, true), 2, border, true);
  round_to_precision(out);
  return out;
}

Tensor pyr_down(const Tensor& x) {
  const auto blurred = gaussian_blur(x);
  const std::size_t c = x.dim(0), oh = (x.dim(1) + 1) / 2, ow = (x.dim(2) + 1) / 2;
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) out.at(ch, y, xx) = blurred.at(ch, 2 * y, 2 * xx);
  return out;
}

Tensor pyr_down_adjoint(const Tensor& g, const Shape& input_shape) {
  Tensor spread(input_shape);
  for (std::size_t ch = 0; ch < g.dim(0); ++ch)
    for (std::size_t y = 0; y < g.dim(1); ++y)
      for (std::size_t xx = 0; xx < g.dim(2); ++xx) spread.at(ch, 2 * y, 2 * xx) = g.at(ch, y, xx);
  return gaussian_blur_adjoint(spread);
}

Tensor pyr_up(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  check_up_target(x.shape(), out_h, out_w);
  Tensor z({x.dim(0), out_h, out_w});
  for (std::size_t ch = 0; ch < x.dim(0); ++ch)
    for (std::size_t y = 0; y < x.dim(1); ++y)
      for (std::size_t xx = 0; xx < x.dim(2); ++xx) z.at(ch, 2 * y, 2 * xx) = 4.0 * x.at(ch, y, xx);
  return gaussian_blur(z, Border::Reflect101);
}

Tensor pyr_up_adjoint(const Tensor& g, const Shape& input_shape) {
  const auto spread = gaussian_blur_adjoint(g, Border::Reflect101);
  Tensor out(input_shape);
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch)
    for (std::size_t y = 0; y < input_shape[1]; ++y)
      for (std::size_t xx = 0; xx < input_shape[2]; ++xx) out.at(ch, y, xx) = 4.0 * spread.at(ch, 2 * y, 2 * xx);
  round_to_precision(out);
  return out;
}

void check_pyramid_input(const Shape& shape, std::size_t levels) {
  require_rank(shape, 3, "pyramid input");
  if (levels < 2) throw ShapeError("pyramid: at least 2 levels required");
  const std::size_t min_side = std::min(shape[1], shape[2]);
  if (min_side < (std::size_t{4} << (levels - 1))) {
    throw ShapeError("pyramid: " + shape_str(shape) + " too small for " + std::to_string(levels) + " levels");
  }
}

std::vector<Tensor> gaussian_pyramid(const Tensor& x, std::size_t levels) {
  check_pyramid_input(x.shape(), levels);
  std::vector<Tensor> g{x};
  for (std::size_t k = 1; k < levels; ++k) g.push_back(pyr_down(g.back()));
  return g;
}

Pyramid decompose(const Tensor& x, std::size_t levels) {
  auto g = gaussian_pyramid(x, levels);
  Pyramid p;
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    p.residuals.push_back(g[k] - pyr_up(g[k + 1], g[k].dim(1), g[k].dim(2)));
  }
  p.base = std::move(g.back());
  return p;
}

Tensor reconstruct(const Pyramid& p) {
  Tensor x = p.base;
  for (std::size_t k = p.residuals.size(); k-- > 0;) {
    const auto& r = p.residuals[k];
    require_rank(r.shape(), 3, "reconstruct");
    if (r.dim(0) != x.dim(0)) throw ShapeError("reconstruct: channel mismatch between levels");
    x = pyr_up(x, r.dim(1), r.dim(2)) + r;
  }
  return x;
}

ad::Var pyr_down(const ad::Var& x) {
  const Shape in = x.shape();
  return ad::linear_map(
      x, [](const Tensor& t) { return pyr_down(t); },
      [in](const Tensor& g) { return pyr_down_adjoint(g, in); }, "pyr_down");
}

ad::Var pyr_up(const ad::Var& x, std::size_t out_h, std::size_t out_w) {
  const Shape in = x.shape();
  check_up_target(in, out_h, out_w);
  return ad::linear_map(
      x, [out_h, out_w](const Tensor& t) { return pyr_up(t, out_h, out_w); },
      [in](const Tensor& g) { return pyr_up_adjoint(g, in); }, "pyr_up");
}

VarPyramid decompose(const ad::Var& x, std::size_t levels) {
  check_pyramid_input(x.shape(), levels);
  std::vector<ad::Var> g{x};
  for (std::size_t k = 1; k < levels; ++k) g.push_back(pyr_down(g.back()));
  VarPyramid p;
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    p.residuals.push_back(ad::sub(g[k], pyr_up(g[k + 1], g[k].dim(1), g[k].dim(2))));
  }
  p.base = g.back();
  return p;
}

}  // namespace hdft
