#include "hdft/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "hdft/pyramid.hpp"

namespace hdft {

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw std::invalid_argument("loss weights must be nonnegative");
}

ad::Var recon_loss(const ad::Var& o1, const ad::Var& g, ReconKind kind) {
  require_same_shape(o1.shape(), g.shape(), "recon_loss");
  return kind == ReconKind::L1 ? ad::l1_distance(o1, g) : ad::sq_distance(o1, g);
}

double pyramid_level_weight(std::size_t level) {
  if (level < 2) throw std::invalid_argument("pyramid_level_weight: levels start at 2");
  return std::ldexp(1.0, static_cast<int>(level) - 2);
}

ad::Var pyramid_loss(const std::vector<ad::Var>& outputs, const std::vector<Tensor>& gt_pyramid, ReconKind kind) {
  if (outputs.size() != gt_pyramid.size()) {
    throw ShapeError("pyramid_loss: " + std::to_string(outputs.size()) + " outputs vs " +
                     std::to_string(gt_pyramid.size()) + " ground-truth levels");
  }
  if (outputs.size() < 2) throw ShapeError("pyramid_loss: need at least 2 levels");
  ad::Var total;
  for (std::size_t i = 2; i <= outputs.size(); ++i) {
    auto term = ad::scale(recon_loss(outputs[i - 1], ad::constant(gt_pyramid[i - 1]), kind), pyramid_level_weight(i));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

ad::Var total_loss(const VarPipelineOutput& out, const Tensor& gt, const LossWeights& w) {
  w.validate();
  auto recon = recon_loss(out.outputs.front(), ad::constant(gt), w.recon);
  auto pyr = pyramid_loss(out.outputs, gaussian_pyramid(gt, out.outputs.size()), w.recon);
  return ad::add(ad::scale(recon, w.lambda1), ad::scale(pyr, w.lambda2));
}

}  // namespace hdft
