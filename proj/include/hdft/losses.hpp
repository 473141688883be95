#pragma once

#include <vector>

#include "hdft/autodiff.hpp"
#include "hdft/pipeline.hpp"

namespace hdft {

enum class ReconKind { L1, L2 };

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  ReconKind recon = ReconKind::L1;

  void validate() const;
};

// Sum over all entries of |o1 - g| (or (o1 - g)^2 for L2).
ad::Var recon_loss(const ad::Var& o1, const ad::Var& g, ReconKind kind = ReconKind::L1);

// Weight for pyramid level i (1-based, i >= 2): 2^(i-2).
double pyramid_level_weight(std::size_t level);

// outputs and gt_pyramid are finest first; level 1 is skipped because the
// reconstruction term already covers it.
ad::Var pyramid_loss(const std::vector<ad::Var>& outputs, const std::vector<Tensor>& gt_pyramid,
                     ReconKind kind = ReconKind::L1);

ad::Var total_loss(const VarPipelineOutput& out, const Tensor& gt, const LossWeights& w);

}  // namespace hdft
