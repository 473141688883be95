#pragma once

#include <cstddef>
#include <utility>

#include "hdft/tensor.hpp"

namespace hdft {

enum class PadMode { Zero, Replicate };
enum class PoolKind { Max, Avg };

struct WindowGrid {
  Tensor windows;  // [num_windows, C, wH, wW]
  std::size_t channels = 0, height = 0, width = 0;
  std::size_t win_h = 0, win_w = 0;
  std::size_t pad_h = 0, pad_w = 0;

  std::size_t rows() const { return (height + pad_h) / win_h; }
  std::size_t cols() const { return (width + pad_w) / win_w; }
  std::size_t num_windows() const { return rows() * cols(); }
};

// Zero-pads bottom/right to whole windows and tiles row-major.
WindowGrid window_partition(const Tensor& x, std::size_t win_h, std::size_t win_w);
Tensor window_merge(const WindowGrid& grid);
// Same as window_merge but with replacement window contents.
Tensor window_merge(const Tensor& windows, const WindowGrid& layout);

std::size_t conv_out_extent(std::size_t in, std::size_t stride);

// Cross-correlation with "same" padding ((k-1)/2 each side). Output extent is
// ceil(H/stride). Kernel layout [Cout, Cin, kH, kW]; kH and kW must be odd.
Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride = 1,
              PadMode pad = PadMode::Zero);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t stride, PadMode pad);
Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& x, const Shape& kernel_shape,
                          std::size_t stride, PadMode pad);

// Adds bias[c] to every pixel of channel c.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// 2x2 window, stride 2; odd trailing rows/cols are replicated.
Tensor pool2(const Tensor& x, PoolKind kind);
Tensor pool2_grad(const Tensor& grad_out, const Tensor& x, PoolKind kind);

// Nearest-neighbour 2x upsampling cropped to target; target extents must be
// 2H or 2H-1 (likewise for W).
Tensor upsample2(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor upsample2_grad(const Tensor& grad_out, const Shape& input_shape);

// Numerically stable softmax along one axis.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor softmax_grad(const Tensor& grad_out, const Tensor& y, std::size_t axis);

// Replicate padding on the bottom/right edges; crop is its forward inverse.
Tensor pad_replicate(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor pad_replicate_grad(const Tensor& grad_out, const Shape& input_shape);
Tensor crop(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor crop_grad(const Tensor& grad_out, const Shape& input_shape);

}  // namespace hdft
