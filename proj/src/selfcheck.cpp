#include "hdft/selfcheck.hpp"

#include <stdexcept>

#include "hdft/blocks.hpp"
#include "hdft/fusion.hpp"
#include "hdft/losses.hpp"
#include "hdft/pyramid.hpp"

namespace hdft {

namespace {

Tensor uniform_tensor(std::uint64_t seed, const std::string& name, Shape shape, double lo, double hi) {
  NamedRng rng(seed, "gradcheck/" + name);
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

// Zero-initialized layers would hide whole paths from the check.
void randomize(ParamStore& p, std::uint64_t seed, double amplitude) {
  for (auto& [name, t] : p.entries()) t = uniform_tensor(seed, "param/" + name, t.shape(), -amplitude, amplitude);
}

ad::Var project(const ad::Var& y, std::uint64_t seed) {
  return ad::sum(ad::mul(y, ad::constant(uniform_tensor(seed, "projection", y.shape(), -1.0, 1.0))));
}

}  // namespace

std::vector<std::string> gradient_suite_blocks() {
  return {"hfa", "dfffn", "hdf_block", "restorer", "unet", "fusion", "loss"};
}

double gradient_tolerance(Precision p) { return p == Precision::F32 ? 1e-4 : 1e-6; }

GradCheckReport check_block_gradients(const std::string& block, Precision precision, std::uint64_t seed) {
  const double tol = gradient_tolerance(precision);
  GradCheckOptions opt;
  opt.analytic_precision = precision;
  ParamStore p;

  if (block == "hfa" || block == "dfffn" || block == "hdf_block") {
    if (block == "hfa") init_hfa(p, "m", 3, seed);
    if (block == "dfffn") init_dfffn(p, "m", 3, {}, seed);
    if (block == "hdf_block") init_hdf_block(p, "m", 3, {}, seed);
    randomize(p, seed, 0.3);
    p.add("x", uniform_tensor(seed, "x", {3, 8, 12}, -1.0, 1.0));
    auto fn = [&](const Binder& b) -> ad::Var {
      if (block == "hfa") return project(hfa_forward(b, "m", b("x")), seed);
      if (block == "dfffn") return project(dfffn_forward(b, "m", b("x")), seed);
      return project(hdf_block(b, "m", b("x")), seed);
    };
    return grad_check(fn, p, tol, opt);
  }

  if (block == "restorer" || block == "unet") {
    RestorerConfig cfg;
    cfg.kind = block == "unet" ? RestorerKind::Unet : RestorerKind::Hdf;
    cfg.width = 4;  // layer norm over fewer channels is too ill-conditioned for a clean check
    init_restorer(p, "r", cfg, seed);
    randomize(p, seed, 0.4);
    p.add("x", uniform_tensor(seed, "x", {3, 8, 8}, -1.0, 1.0));
    opt.max_entries_per_param = 40;
    return grad_check([&](const Binder& b) { return project(restorer_forward(b, "r", b("x"), cfg), seed); }, p, tol,
                      opt);
  }

  if (block == "fusion") {
    init_fusion(p, "fusion", {}, seed);
    randomize(p, seed, 0.6);
    p.add("i1", uniform_tensor(seed, "i1", {3, 6, 6}, 0.0, 1.0));
    p.add("i2", uniform_tensor(seed, "i2", {3, 6, 6}, 0.0, 1.0));
    // Max pooling is piecewise linear; a narrow step keeps probes off its kinks.
    opt.step = 1e-6;
    return grad_check([&](const Binder& b) { return project(fusion_forward(b, "fusion", b("i1"), b("i2")).fused, seed); },
                      p, tol, opt);
  }

  if (block == "loss") {
    const auto gt = uniform_tensor(seed, "gt", {3, 16, 16}, 0.0, 1.0);
    const auto gp = gaussian_pyramid(gt, 3);
    for (std::size_t i = 0; i < gp.size(); ++i) {
      // Offsets of at least 0.05 in alternating directions keep |.| away from its kink.
      auto off = uniform_tensor(seed, "offset" + std::to_string(i), gp[i].shape(), 0.05, 0.3);
      for (std::size_t k = 1; k < off.size(); k += 2) off[k] = -off[k];
      p.add("o" + std::to_string(i + 1), gp[i] + off);
    }
    return grad_check(
        [&](const Binder& b) {
          VarPipelineOutput out;
          for (std::size_t i = 0; i < gp.size(); ++i) out.outputs.push_back(b("o" + std::to_string(i + 1)));
          return total_loss(out, gt, {});
        },
        p, tol, opt);
  }

  throw std::invalid_argument("unknown gradient-check block '" + block + "'");
}

}  // namespace hdft
