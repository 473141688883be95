#include "hdft/ops.hpp"

#include <algorithm>
#include <cmath>

namespace hdft {

namespace {

struct ConvGeometry {
  std::size_t cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t stride;
  std::size_t out_h, out_w;
  std::size_t pad_y, pad_x;  // top/left
  std::size_t hp, wp;        // padded input extents actually touched
};

ConvGeometry conv_geometry(const Shape& x, const Shape& k, std::size_t stride) {
  require_rank(x, 3, "conv2d input");
  require_rank(k, 4, "conv2d kernel");
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (k[1] != x[0]) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(k[1]) + " input channels, got " +
                     std::to_string(x[0]));
  }
  if (k[2] % 2 == 0 || k[3] % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  ConvGeometry g{};
  g.cin = x[0];
  g.h = x[1];
  g.w = x[2];
  g.cout = k[0];
  g.kh = k[2];
  g.kw = k[3];
  g.stride = stride;
  g.out_h = conv_out_extent(g.h, stride);
  g.out_w = conv_out_extent(g.w, stride);
  g.pad_y = (g.kh - 1) / 2;
  g.pad_x = (g.kw - 1) / 2;
  g.hp = (g.out_h - 1) * stride + g.kh;
  g.wp = (g.out_w - 1) * stride + g.kw;
  return g;
}

std::ptrdiff_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1);
}

std::vector<double> pad_input(const Tensor& x, const ConvGeometry& g, PadMode mode) {
  std::vector<double> xp(g.cin * g.hp * g.wp, 0.0);
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t r = 0; r < g.hp; ++r) {
      const auto sy = static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(g.pad_y);
      const bool row_in = sy >= 0 && sy < static_cast<std::ptrdiff_t>(g.h);
      if (!row_in && mode == PadMode::Zero) continue;
      const auto y = static_cast<std::size_t>(clamp_index(sy, g.h));
      double* dst = xp.data() + (c * g.hp + r) * g.wp;
      for (std::size_t q = 0; q < g.wp; ++q) {
        const auto sx = static_cast<std::ptrdiff_t>(q) - static_cast<std::ptrdiff_t>(g.pad_x);
        const bool col_in = sx >= 0 && sx < static_cast<std::ptrdiff_t>(g.w);
        if (!col_in && mode == PadMode::Zero) continue;
        dst[q] = x.at(c, y, static_cast<std::size_t>(clamp_index(sx, g.w)));
      }
    }
  }
  return xp;
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride, PadMode pad) {
  const auto g = conv_geometry(x.shape(), kernel.shape(), stride);
  const auto xp = pad_input(x, g, pad);
  Tensor out({g.cout, g.out_h, g.out_w});
  const double* kd = kernel.data().data();
  double* od = out.data().data();
  for (std::size_t co = 0; co < g.cout; ++co) {
    double* oplane = od + co * g.out_h * g.out_w;
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const double* iplane = xp.data() + ci * g.hp * g.wp;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const double* krow = kd + ((co * g.cin + ci) * g.kh + ky) * g.kw;
        if (stride == 1 && g.kw == 3) {
          const double w0 = krow[0], w1 = krow[1], w2 = krow[2];
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            double* orow = oplane + oy * g.out_w;
            const double* irow = iplane + (oy + ky) * g.wp;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              orow[ox] += w0 * irow[ox] + w1 * irow[ox + 1] + w2 * irow[ox + 2];
            }
          }
          continue;
        }
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const double wgt = krow[kx];
          if (wgt == 0.0) continue;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            double* orow = oplane + oy * g.out_w;
            const double* irow = iplane + (oy * stride + ky) * g.wp + kx;
            if (stride == 1) {
              for (std::size_t ox = 0; ox < g.out_w; ++ox) orow[ox] += wgt * irow[ox];
            } else {
              for (std::size_t ox = 0; ox < g.out_w; ++ox) orow[ox] += wgt * irow[ox * stride];
            }
          }
        }
      }
    }
  }
  round_to_precision(out);
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t stride, PadMode pad) {
  const auto g = conv_geometry(input_shape, kernel.shape(), stride);
  require_same_shape(grad_out.shape(), Shape{g.cout, g.out_h, g.out_w}, "conv2d_grad_input");
  std::vector<double> gp(g.cin * g.hp * g.wp, 0.0);
  const double* kd = kernel.data().data();
  const double* gd = grad_out.data().data();
  for (std::size_t co = 0; co < g.cout; ++co) {
    const double* gplane = gd + co * g.out_h * g.out_w;
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      double* pplane = gp.data() + ci * g.hp * g.wp;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        const double* krow = kd + ((co * g.cin + ci) * g.kh + ky) * g.kw;
        if (stride == 1 && g.kw == 3) {
          // Gather form: padded column q receives taps from outputs q-2, q-1, q.
          const double w0 = krow[0], w1 = krow[1], w2 = krow[2];
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const double* grow = gplane + oy * g.out_w;
            double* prow = pplane + (oy + ky) * g.wp;
            const std::size_t n = g.out_w;
            prow[0] += w0 * grow[0];
            if (n > 1) prow[1] += w0 * grow[1] + w1 * grow[0];
            for (std::size_t q = 2; q < n; ++q) {
              prow[q] += w0 * grow[q] + w1 * grow[q - 1] + w2 * grow[q - 2];
            }
            prow[n] += w1 * grow[n - 1] + (n > 1 ? w2 * grow[n - 2] : 0.0);
            prow[n + 1] += w2 * grow[n - 1];
          }
          continue;
        }
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const double wgt = krow[kx];
          if (wgt == 0.0) continue;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const double* grow = gplane + oy * g.out_w;
            double* prow = pplane + (oy * stride + ky) * g.wp + kx;
            if (stride == 1) {
              for (std::size_t ox = 0; ox < g.out_w; ++ox) prow[ox] += wgt * grow[ox];
            } else {
              for (std::size_t ox = 0; ox < g.out_w; ++ox) prow[ox * stride] += wgt * grow[ox];
            }
          }
        }
      }
    }
  }
  Tensor gx(input_shape);
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t r = 0; r < g.hp; ++r) {
      const auto sy = static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(g.pad_y);
      const bool row_in = sy >= 0 && sy < static_cast<std::ptrdiff_t>(g.h);
      if (!row_in && pad == PadMode::Zero) continue;
      const auto y = static_cast<std::size_t>(clamp_index(sy, g.h));
      const double* src = gp.data() + (c * g.hp + r) * g.wp;
      for (std::size_t q = 0; q < g.wp; ++q) {
        const auto sx = static_cast<std::ptrdiff_t>(q) - static_cast<std::ptrdiff_t>(g.pad_x);
        const bool col_in = sx >= 0 && sx < static_cast<std::ptrdiff_t>(g.w);
        if (!col_in && pad == PadMode::Zero) continue;
        gx.at(c, y, static_cast<std::size_t>(clamp_index(sx, g.w))) += src[q];
      }
    }
  }
  round_to_precision(gx);
  return gx;
}

Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& x, const Shape& kernel_shape,
                          std::size_t stride, PadMode pad) {
  const auto g = conv_geometry(x.shape(), kernel_shape, stride);
  require_same_shape(grad_out.shape(), Shape{g.cout, g.out_h, g.out_w}, "conv2d_grad_kernel");
  const auto xp = pad_input(x, g, pad);
  Tensor gk(kernel_shape);
  const double* gd = grad_out.data().data();
  for (std::size_t co = 0; co < g.cout; ++co) {
    const double* gplane = gd + co * g.out_h * g.out_w;
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const double* iplane = xp.data() + ci * g.hp * g.wp;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const double* grow = gplane + oy * g.out_w;
            const double* irow = iplane + (oy * stride + ky) * g.wp + kx;
            if (stride == 1) {
              double a[4] = {0.0, 0.0, 0.0, 0.0};
              std::size_t ox = 0;
              for (; ox + 4 <= g.out_w; ox += 4) {
                a[0] += grow[ox] * irow[ox];
                a[1] += grow[ox + 1] * irow[ox + 1];
                a[2] += grow[ox + 2] * irow[ox + 2];
                a[3] += grow[ox + 3] * irow[ox + 3];
              }
              for (; ox < g.out_w; ++ox) a[0] += grow[ox] * irow[ox];
              acc += (a[0] + a[1]) + (a[2] + a[3]);
            } else {
              for (std::size_t ox = 0; ox < g.out_w; ++ox) acc += grow[ox] * irow[ox * stride];
            }
          }
          gk[((co * g.cin + ci) * g.kh + ky) * g.kw + kx] = acc;
        }
      }
    }
  }
  round_to_precision(gk);
  return gk;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x.shape(), 3, "add_channel_bias");
  if (bias.size() != x.dim(0)) throw ShapeError("add_channel_bias: bias length mismatch");
  Tensor out = x;
  const std::size_t plane = x.dim(1) * x.dim(2);
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += bias[c];
  }
  round_to_precision(out);
  return out;
}

Tensor pool2(const Tensor& x, PoolKind kind) {
  require_rank(x.shape(), 3, "pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
        const double a = x.at(ch, y0, x0), b = x.at(ch, y0, x1);
        const double cc = x.at(ch, y1, x0), d = x.at(ch, y1, x1);
        out.at(ch, oy, ox) =
            kind == PoolKind::Max ? std::max({a, b, cc, d}) : 0.25 * (a + b + cc + d);
      }
    }
  }
  round_to_precision(out);
  return out;
}

Tensor pool2_grad(const Tensor& grad_out, const Tensor& x, PoolKind kind) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  require_same_shape(grad_out.shape(), Shape{c, oh, ow}, "pool2_grad");
  Tensor gx(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t ys[2] = {2 * oy, std::min(2 * oy + 1, h - 1)};
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t xs[2] = {2 * ox, std::min(2 * ox + 1, w - 1)};
        const double g = grad_out.at(ch, oy, ox);
        if (kind == PoolKind::Avg) {
          for (auto yy : ys)
            for (auto xx : xs) gx.at(ch, yy, xx) += 0.25 * g;
          continue;
        }
        // Ties go to the first position in row-major scan order.
        std::size_t by = ys[0], bx = xs[0];
        double best = x.at(ch, by, bx);
        for (auto yy : ys) {
          for (auto xx : xs) {
            if (x.at(ch, yy, xx) > best) {
              best = x.at(ch, yy, xx);
              by = yy;
              bx = xx;
            }
          }
        }
        gx.at(ch, by, bx) += g;
      }
    }
  }
  round_to_precision(gx);
  return gx;
}

namespace {
void check_upsample_target(std::size_t in, std::size_t out, const char* axis) {
  if (out != 2 * in && out + 1 != 2 * in) {
    throw ShapeError(std::string("upsample2: target ") + axis + " " + std::to_string(out) +
                     " must be 2x or 2x-1 of " + std::to_string(in));
  }
}
}  // namespace

Tensor upsample2(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x.shape(), 3, "upsample2");
  check_upsample_target(x.dim(1), out_h, "height");
  check_upsample_target(x.dim(2), out_w, "width");
  Tensor out({x.dim(0), out_h, out_w});
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xx = 0; xx < out_w; ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
  return out;
}

Tensor upsample2_grad(const Tensor& grad_out, const Shape& input_shape) {
  Tensor gx(input_shape);
  for (std::size_t c = 0; c < grad_out.dim(0); ++c)
    for (std::size_t y = 0; y < grad_out.dim(1); ++y)
      for (std::size_t xx = 0; xx < grad_out.dim(2); ++xx)
        gx.at(c, y / 2, xx / 2) += grad_out.at(c, y, xx);
  round_to_precision(gx);
  return gx;
}

namespace {
struct AxisSplit {
  std::size_t outer, n, inner;
};
AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("softmax: axis out of range for " + shape_str(s));
  AxisSplit a{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}
}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto a = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < a.outer; ++o) {
    for (std::size_t i = 0; i < a.inner; ++i) {
      const std::size_t base = o * a.n * a.inner + i;
      double mx = x[base];
      for (std::size_t k = 1; k < a.n; ++k) mx = std::max(mx, x[base + k * a.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < a.n; ++k) {
        const double e = std::exp(x[base + k * a.inner] - mx);
        out[base + k * a.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < a.n; ++k) out[base + k * a.inner] /= total;
    }
  }
  round_to_precision(out);
  return out;
}

Tensor softmax_grad(const Tensor& grad_out, const Tensor& y, std::size_t axis) {
  require_same_shape(grad_out.shape(), y.shape(), "softmax_grad");
  const auto a = split_axis(y.shape(), axis);
  Tensor gx(y.shape());
  for (std::size_t o = 0; o < a.outer; ++o) {
    for (std::size_t i = 0; i < a.inner; ++i) {
      const std::size_t base = o * a.n * a.inner + i;
      double dot = 0.0;
      for (std::size_t k = 0; k < a.n; ++k) dot += grad_out[base + k * a.inner] * y[base + k * a.inner];
      for (std::size_t k = 0; k < a.n; ++k) {
        const std::size_t j = base + k * a.inner;
        gx[j] = y[j] * (grad_out[j] - dot);
      }
    }
  }
  round_to_precision(gx);
  return gx;
}

Tensor pad_replicate(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x.shape(), 3, "pad_replicate");
  if (out_h < x.dim(1) || out_w < x.dim(2)) throw ShapeError("pad_replicate: target smaller than input");
  Tensor out({x.dim(0), out_h, out_w});
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xx = 0; xx < out_w; ++xx)
        out.at(c, y, xx) = x.at(c, std::min(y, x.dim(1) - 1), std::min(xx, x.dim(2) - 1));
  return out;
}

Tensor pad_replicate_grad(const Tensor& grad_out, const Shape& input_shape) {
  Tensor gx(input_shape);
  for (std::size_t c = 0; c < grad_out.dim(0); ++c)
    for (std::size_t y = 0; y < grad_out.dim(1); ++y)
      for (std::size_t xx = 0; xx < grad_out.dim(2); ++xx)
        gx.at(c, std::min(y, input_shape[1] - 1), std::min(xx, input_shape[2] - 1)) +=
            grad_out.at(c, y, xx);
  round_to_precision(gx);
  return gx;
}

Tensor crop(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x.shape(), 3, "crop");
  if (out_h > x.dim(1) || out_w > x.dim(2)) throw ShapeError("crop: target larger than input");
  Tensor out({x.dim(0), out_h, out_w});
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xx = 0; xx < out_w; ++xx) out.at(c, y, xx) = x.at(c, y, xx);
  return out;
}

Tensor crop_grad(const Tensor& grad_out, const Shape& input_shape) {
  Tensor gx(input_shape);
  for (std::size_t c = 0; c < grad_out.dim(0); ++c)
    for (std::size_t y = 0; y < grad_out.dim(1); ++y)
      for (std::size_t xx = 0; xx < grad_out.dim(2); ++xx) gx.at(c, y, xx) = grad_out.at(c, y, xx);
  return gx;
}

WindowGrid window_partition(const Tensor& x, std::size_t win_h, std::size_t win_w) {
  require_rank(x.shape(), 3, "window_partition");
  if (win_h == 0 || win_w == 0) throw ShapeError("window_partition: window extents must be >= 1");
  WindowGrid g;
  g.channels = x.dim(0);
  g.height = x.dim(1);
  g.width = x.dim(2);
  g.win_h = win_h;
  g.win_w = win_w;
  g.pad_h = (win_h - g.height % win_h) % win_h;
  g.pad_w = (win_w - g.width % win_w) % win_w;
  const std::size_t rows = g.rows(), cols = g.cols();
  g.windows = Tensor({rows * cols, g.channels, win_h, win_w});
  auto& wd = g.windows.vec();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < cols; ++q) {
      const std::size_t n = r * cols + q;
      for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t y = 0; y < win_h; ++y) {
          const std::size_t sy = r * win_h + y;
          if (sy >= g.height) break;
          for (std::size_t xx = 0; xx < win_w; ++xx) {
            const std::size_t sx = q * win_w + xx;
            if (sx >= g.width) break;
            wd[((n * g.channels + c) * win_h + y) * win_w + xx] = x.at(c, sy, sx);
          }
        }
      }
    }
  }
  return g;
}

Tensor window_merge(const Tensor& windows, const WindowGrid& layout) {
  const auto& g = layout;
  if (g.win_h == 0 || g.win_w == 0 || (g.height + g.pad_h) % g.win_h != 0 ||
      (g.width + g.pad_w) % g.win_w != 0 || g.pad_h >= g.win_h || g.pad_w >= g.win_w) {
    throw ShapeError("window_merge: inconsistent grid metadata");
  }
  require_same_shape(windows.shape(), Shape{g.num_windows(), g.channels, g.win_h, g.win_w},
                     "window_merge");
  Tensor out({g.channels, g.height, g.width});
  const std::size_t cols = g.cols();
  const auto& wd = windows.vec();
  for (std::size_t n = 0; n < g.num_windows(); ++n) {
    const std::size_t r = n / cols, q = n % cols;
    for (std::size_t c = 0; c < g.channels; ++c) {
      for (std::size_t y = 0; y < g.win_h; ++y) {
        const std::size_t sy = r * g.win_h + y;
        if (sy >= g.height) break;
        for (std::size_t xx = 0; xx < g.win_w; ++xx) {
          const std::size_t sx = q * g.win_w + xx;
          if (sx >= g.width) break;
          out.at(c, sy, sx) = wd[((n * g.channels + c) * g.win_h + y) * g.win_w + xx];
        }
      }
    }
  }
  return out;
}

Tensor window_merge(const WindowGrid& grid) { return window_merge(grid.windows, grid); }

}  // namespace hdft
