#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "hdft/losses.hpp"
#include "hdft/optim.hpp"
#include "hdft/pipeline.hpp"

namespace hdft {

// One training example. A single input is an enhancement pair; two inputs are
// an (under, over) exposure pair for the fusion front end.
struct Sample {
  std::vector<Tensor> inputs;
  Tensor gt;
};

struct TrainConfig {
  ModelConfig model;
  LossWeights loss;
  AdamConfig adam;
  std::size_t iterations = 2000;
  std::size_t crop = 64;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // 0 disables checkpoints
  std::filesystem::path checkpoint_path;
  std::size_t log_interval = 1;          // history rows every n iterations

  void validate() const;
};

struct HistoryRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double psnr = 0.0;  // of O^1 (clamped) against the crop's ground truth
};

struct TrainState {
  ParamStore params;
  AdamState adam;
  std::vector<HistoryRow> history;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ProgressFn = std::function<void(const HistoryRow&)>;

// Fresh state: parameters from init_params(cfg.seed, cfg.model).
TrainState initial_state(const TrainConfig& cfg);

// Runs until state.adam.step == cfg.iterations. Crops are a pure function of
// (seed, iteration), so a state restored from a checkpoint continues the
// uninterrupted run exactly.
void train(const std::vector<Sample>& data, const TrainConfig& cfg, TrainState& state,
           const ProgressFn& progress = {});

// Convenience wrapper that starts from initial_state (or the given params).
TrainState train(const std::vector<Sample>& data, const TrainConfig& cfg,
                 std::optional<ParamStore> params = std::nullopt, const ProgressFn& progress = {});

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

// Synthetic data.
struct SynthConfig {
  std::vector<double> gammas = {0.4, 2.5};
  double noise_std = 0.01;
};

Tensor synth_clean_image(std::uint64_t seed, std::size_t index, std::size_t size);
// clean^gamma plus Gaussian noise, clamped to [0,1].
Tensor degrade(const Tensor& clean, double gamma, double noise_std, std::uint64_t seed, const std::string& stream);
std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t n, std::size_t size, const SynthConfig& cfg = {});
// (under, over) inputs from the two extreme gammas of the same clean image.
std::vector<Sample> synth_mef_dataset(std::uint64_t seed, std::size_t n, std::size_t size, const SynthConfig& cfg = {});

}  // namespace hdft
