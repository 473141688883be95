#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdft/blocks.hpp"
#include "hdft/fusion.hpp"
#include "hdft/params.hpp"

namespace hdft {

struct ModelConfig {
  std::size_t levels = 4;
  std::size_t width = 16;
  std::size_t scales = 3;
  std::size_t blocks_per_scale = 1;
  BlockOptions block;
  // kinds[k-1] is the restorer for stage k (stage 1 = finest). Empty means the
  // default: plain U-Net at stage 1, HDF restorers at every coarser stage.
  std::vector<RestorerKind> kinds;
  bool with_fusion = false;
  FusionConfig fusion;

  RestorerKind kind(std::size_t stage) const;
  RestorerConfig stage_config(std::size_t stage) const;
  void validate() const;
};

std::string stage_prefix(std::size_t stage);
inline const std::string kFusionPrefix = "fusion";

ParamStore init_params(std::uint64_t seed, const ModelConfig& cfg);

struct PipelineOutput {
  // outputs[i-1] is O^i at the resolution of Gaussian level i; outputs[0] is O^1.
  std::vector<Tensor> outputs;
  Tensor final;  // O^1 clamped to [0,1]
};

struct VarPipelineOutput {
  std::vector<ad::Var> outputs;  // same ordering as PipelineOutput::outputs
  ad::Var fused;                 // fusion front end output, set by forward_mef only
};

void check_forward_input(const Shape& shape, const ModelConfig& cfg);

VarPipelineOutput forward(const Binder& b, const ad::Var& x, const ModelConfig& cfg);
VarPipelineOutput forward_mef(const Binder& b, const ad::Var& i1, const ad::Var& i2, const ModelConfig& cfg);

PipelineOutput forward(const ParamStore& p, const Tensor& x, const ModelConfig& cfg);
PipelineOutput forward_mef(const ParamStore& p, const Tensor& i1, const Tensor& i2, const ModelConfig& cfg);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

std::vector<std::uint8_t> serialize_params(const ParamStore& p, DType dtype = DType::F64);
ParamStore deserialize_params(const std::vector<std::uint8_t>& bytes);
void save_params(const ParamStore& p, const std::filesystem::path& path, DType dtype = DType::F64);
ParamStore load_params(const std::filesystem::path& path);

// Reconstructs the architecture from parameter names and shapes. Flags that
// leave no trace in the weights (softmax variant, scaling, residual switch)
// take their defaults.
ModelConfig infer_config(const ParamStore& p);

}  // namespace hdft
