#pragma once

#include <span>

#include "hdft/tensor.hpp"

namespace hdft {

// One-dimensional transform of arbitrary length. Lengths whose prime factors
// are all <= kMaxDirectRadix use recursive mixed-radix Cooley-Tukey; anything
// else goes through Bluestein's chirp-z with a power-of-two inner transform.
inline constexpr std::size_t kMaxDirectRadix = 31;

// Unnormalized forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
void fft1d(std::span<Complex> data);
// Inverse with 1/N normalization.
void ifft1d(std::span<Complex> data);

// 2D transforms over the last two axes; leading axes are batch.
ComplexTensor fft2(const ComplexTensor& x);
ComplexTensor fft2(const Tensor& x);
ComplexTensor ifft2(const ComplexTensor& x);

// Entrywise complex product of equal-shaped tensors.
ComplexTensor complex_hadamard(const ComplexTensor& a, const ComplexTensor& b);

}  // namespace hdft
