#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hdft/tensor.hpp"

namespace hdft {

// FLOP counts split by kind. FFTs are charged 5 n log2(n) per complex
// transform of n points.
struct FlopCount {
  double conv = 0.0;
  double fft = 0.0;
  double window_fft = 0.0;  // per-window transforms
  double attention = 0.0;   // QK^T and AV products
  double elementwise = 0.0;

  double total() const { return conv + fft + window_fft + attention + elementwise; }
};

inline constexpr const char* kFftCostNote = "fft cost = 5*n*log2(n) per complex transform of n points";

double fft_flops(double points);

// HDF block on a C x H x W map: two layer norms, HFA (four 1x1 maps, three
// full-map transforms) and DFFFN (expansion gamma, window FFT pair, mask).
FlopCount flops_hdf_block(std::size_t c, std::size_t h, std::size_t w, std::size_t window, std::size_t expansion = 2);

// Shifted-window attention block: QKV and output projections, per-window
// QK^T and AV, softmax, and a 4x MLP.
FlopCount flops_window_attention(std::size_t c, std::size_t h, std::size_t w, std::size_t window);

// Modeled peak transient buffer bytes for a straightforward implementation.
double buffer_bytes_hdf_block(std::size_t c, std::size_t h, std::size_t w, std::size_t window,
                              std::size_t expansion = 2);
double buffer_bytes_window_attention(std::size_t c, std::size_t h, std::size_t w, std::size_t window);

enum class Mechanism { HdfBlock, WindowAttention };
std::string mechanism_name(Mechanism m);
Mechanism parse_mechanism(const std::string& s);

struct BenchConfig {
  std::vector<Mechanism> mechanisms = {Mechanism::HdfBlock, Mechanism::WindowAttention};
  std::vector<std::size_t> windows = {8, 32, 64, 128};
  std::vector<std::size_t> maps = {256};
  std::size_t channels = 8;  // width used for timing runs
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  double memory_budget = 1024.0 * 1024.0 * 1024.0;  // modeled bytes above this are reported as out of memory
  std::uint64_t seed = 0;

  void validate() const;
};

struct CostRow {
  Mechanism mechanism = Mechanism::HdfBlock;
  std::size_t window = 0;
  std::size_t map = 0;
  std::size_t channels = 0;
  double flops = 0.0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::size_t repeats = 0;
  double buffer_bytes = 0.0;
  bool out_of_memory = false;
};

struct CostReport {
  std::vector<CostRow> rows;
  std::string note = kFftCostNote;
};

// One forward pass of the benchmarked mechanism on a random map.
Tensor window_attention_forward(const Tensor& x, std::size_t window, std::uint64_t seed);

CostReport run_bench(const BenchConfig& cfg);
void write_report_csv(const CostReport& report, const std::filesystem::path& path);
std::string report_csv(const CostReport& report);

}  // namespace hdft
