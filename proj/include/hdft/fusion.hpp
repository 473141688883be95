#pragma once

#include <cstdint>
#include <string>

#include "hdft/autodiff.hpp"
#include "hdft/params.hpp"

namespace hdft {

struct FusionConfig {
  std::size_t width1 = 8;
  std::size_t width2 = 16;
};

// Registers conv1, conv2, skip and head under `prefix`. The head kernel starts
// at zero, so an untrained block averages its two inputs.
void init_fusion(ParamStore& store, const std::string& prefix, const FusionConfig& cfg, std::uint64_t seed);

struct FusionResult {
  ad::Var attention;  // [2,H,W], softmax across the two maps
  ad::Var fused;      // [3,H,W], not clamped
};

FusionResult fusion_forward(const Binder& b, const std::string& prefix, const ad::Var& i1, const ad::Var& i2);

// Fused image clamped to [0,1].
Tensor fuse_pair(const ParamStore& p, const std::string& prefix, const Tensor& i1, const Tensor& i2);
Tensor fuse_pair_unclamped(const ParamStore& p, const std::string& prefix, const Tensor& i1, const Tensor& i2);

Tensor clamp01(Tensor t);

}  // namespace hdft
