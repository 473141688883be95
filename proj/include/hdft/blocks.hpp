#pragma once

#include <cstdint>
#include <string>

#include "hdft/autodiff.hpp"
#include "hdft/params.hpp"

namespace hdft {

struct BlockOptions {
  bool scaled_attention = false;  // divide M by sqrt(C) before the softmax
  bool channel_softmax = false;   // softmax across channels instead of spatial positions
  bool dfffn_residual = true;
  std::size_t ffn_expansion = 2;
  std::size_t window = 8;
};

enum class RestorerKind { Hdf, Unet };

struct RestorerConfig {
  RestorerKind kind = RestorerKind::Hdf;
  std::size_t in_channels = 3;
  std::size_t width = 16;
  std::size_t scales = 3;
  std::size_t blocks_per_scale = 1;
  BlockOptions block;

  // Entry padding rounds H and W up to a multiple of this.
  std::size_t pad_multiple() const { return std::size_t{1} << (scales - 1); }
  void validate() const;
};

inline constexpr std::size_t kMinRestorerSide = 8;

// Kaiming-uniform kernel [cout, cin, k, k] drawn from the named stream.
Tensor kaiming_kernel(std::uint64_t seed, const std::string& name, std::size_t cout, std::size_t cin,
                      std::size_t k);

// Parameter creation. Every tensor is registered under `prefix + "/..."`.
void init_hfa(ParamStore& store, const std::string& prefix, std::size_t channels, std::uint64_t seed);
void init_dfffn(ParamStore& store, const std::string& prefix, std::size_t channels, const BlockOptions& opt,
                std::uint64_t seed);
void init_hdf_block(ParamStore& store, const std::string& prefix, std::size_t channels, const BlockOptions& opt,
                    std::uint64_t seed);
void init_restorer(ParamStore& store, const std::string& prefix, const RestorerConfig& cfg, std::uint64_t seed);

// Graph construction. Inputs are [C,H,W].
ad::Var hfa_branch(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt = {});
ad::Var hfa_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt = {});
ad::Var dfffn_branch(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt = {});
ad::Var dfffn_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt = {});
ad::Var hdf_block(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt = {});
// Covers both kinds; the U-Net variant replaces every HDF block by conv3x3 + GELU.
ad::Var restorer_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const RestorerConfig& cfg);

// Inference helpers over plain tensors.
Tensor hfa_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt = {});
Tensor dfffn_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt = {});
Tensor hdf_block(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt = {});
Tensor restorer_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const RestorerConfig& cfg);

}  // namespace hdft
