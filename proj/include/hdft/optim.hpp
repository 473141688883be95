#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hdft/autodiff.hpp"
#include "hdft/params.hpp"

namespace hdft {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// Bias-corrected ADAM. Parameters without an entry in grads are left alone
// (their moments are not advanced either).
void adam_step(ParamStore& params, const ad::GradMap& grads, AdamState& state);

struct GradCheckEntry {
  std::string name;
  // max |analytic - numeric| / max(max|numeric|, max|analytic|, floor), where the
  // floor is kRelativeFloor times the largest gradient entry seen in the whole
  // check. Parameters whose gradient vanishes by construction are therefore
  // judged by absolute error against the overall gradient scale.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double grad_scale = 0.0;
  std::size_t checked = 0;
};

inline constexpr double kRelativeFloor = 1e-5;

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double worst() const;
  bool passed() const { return worst() < tolerance; }
};

// Builds the scalar loss from bound parameters.
using LossFn = std::function<ad::Var(const Binder&)>;

struct GradCheckOptions {
  // Fourth-order central stencil (f(-2h), f(-h), f(h), f(2h)), so a wide step
  // keeps both truncation and round-off small.
  double step = 1e-3;
  // Upper bound on probed entries per parameter (evenly strided); 0 = all.
  std::size_t max_entries_per_param = 0;
  // Precision of the analytic (tape) pass. Finite differences always run in
  // F64 so that a 32-bit check measures the tape's rounding, not the probe's.
  Precision analytic_precision = Precision::F64;
  // Only parameters whose names start with this prefix are probed.
  std::string only_prefix;
};

// Central finite differences against the tape gradient for every parameter.
GradCheckReport grad_check(const LossFn& fn, const ParamStore& params, double tolerance,
                           const GradCheckOptions& options = {});

}  // namespace hdft
