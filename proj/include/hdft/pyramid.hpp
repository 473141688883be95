#pragma once

#include <vector>

#include "hdft/autodiff.hpp"
#include "hdft/tensor.hpp"

namespace hdft {

enum class Border { Replicate, Reflect101 };

// Separable 5-tap binomial blur, kernel [1 4 6 4 1] / 16 on each axis.
Tensor gaussian_blur(const Tensor& x, Border border = Border::Replicate);
Tensor gaussian_blur_adjoint(const Tensor& g, Border border = Border::Replicate);

// Blur then keep every second sample starting at 0: [C,H,W] -> [C,ceil(H/2),ceil(W/2)].
Tensor pyr_down(const Tensor& x);
Tensor pyr_down_adjoint(const Tensor& g, const Shape& input_shape);

// Zero-interleave to (out_h, out_w) then blur with gain 4. out_h must be 2H or
// 2H-1 (likewise out_w). The blur uses reflect-101 borders so that constant
// images map to the same constant for both target parities.
Tensor pyr_up(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor pyr_up_adjoint(const Tensor& g, const Shape& input_shape);

struct Pyramid {
  std::vector<Tensor> residuals;  // finest first; residuals[k] has the extent of Gaussian level k
  Tensor base;                    // coarsest Gaussian level

  std::size_t levels() const { return residuals.size() + 1; }
};

// Smallest side must satisfy min(H,W) >= 4 * 2^(levels-1).
void check_pyramid_input(const Shape& shape, std::size_t levels);

std::vector<Tensor> gaussian_pyramid(const Tensor& x, std::size_t levels);
Pyramid decompose(const Tensor& x, std::size_t levels);
Tensor reconstruct(const Pyramid& p);

// Differentiable counterparts for use inside a training graph.
ad::Var pyr_down(const ad::Var& x);
ad::Var pyr_up(const ad::Var& x, std::size_t out_h, std::size_t out_w);

struct VarPyramid {
  std::vector<ad::Var> residuals;
  ad::Var base;
};
VarPyramid decompose(const ad::Var& x, std::size_t levels);

}  // namespace hdft
