#include "doctest.h"
#include "hdft/losses.hpp"
#include "hdft/pyramid.hpp"
#include "test_util.hpp"

using namespace hdft;

namespace {

double value(const ad::Var& v) { return v.value()[0]; }
ad::Var c(const Tensor& t) { return ad::constant(t); }

}  // namespace

TEST_CASE("reconstruction loss") {
  auto g = oracle::random_tensor({3, 4, 4}, 1);
  CHECK(value(recon_loss(c(g), c(g))) == 0.0);
  CHECK(value(recon_loss(c(Tensor({3, 2, 2}, 0.5)), c(Tensor({3, 2, 2}, 0.25)))) == 3.0);

  auto o = oracle::random_tensor({3, 4, 4}, 2);
  const double base = value(recon_loss(c(o), c(g)));
  CHECK(value(recon_loss(c(2.5 * o), c(2.5 * g))) == doctest::Approx(2.5 * base).epsilon(1e-14));
  CHECK(value(recon_loss(c(g), c(o))) == base);
  CHECK(value(recon_loss(c(Tensor({3, 2, 2}, 0.5)), c(Tensor({3, 2, 2}, 0.25)), ReconKind::L2)) == 0.75);
  CHECK_THROWS_AS(recon_loss(c(g), c(Tensor({3, 4, 5}))), ShapeError);
}

TEST_CASE("pyramid loss weights and the level-3 example") {
  CHECK(pyramid_level_weight(2) == 1.0);
  CHECK(pyramid_level_weight(3) == 2.0);
  CHECK(pyramid_level_weight(4) == 4.0);

  std::vector<Tensor> gt{Tensor({3, 16, 16}, 0.2), Tensor({3, 8, 8}, 0.2), Tensor({3, 4, 4}, 0.2), Tensor({3, 2, 2}, 0.2)};
  std::vector<ad::Var> out;
  for (const auto& t : gt) out.push_back(c(t));
  CHECK(value(pyramid_loss(out, gt)) == 0.0);

  out[2] = c(gt[2] + Tensor({3, 4, 4}, 0.1));
  CHECK(value(pyramid_loss(out, gt)) == doctest::Approx(9.6).epsilon(1e-12));

  // Level 1 is not part of the pyramid term.
  out[2] = c(gt[2]);
  out[0] = c(Tensor({3, 16, 16}, 5.0));
  CHECK(value(pyramid_loss(out, gt)) == 0.0);

  out.pop_back();
  CHECK_THROWS_AS(pyramid_loss(out, gt), ShapeError);
}

TEST_CASE("total loss") {
  auto gt = oracle::random_tensor({3, 32, 32}, 3, 0, 1);
  auto gp = gaussian_pyramid(gt, 4);
  VarPipelineOutput perfect;
  for (const auto& t : gp) perfect.outputs.push_back(c(t));
  CHECK(value(total_loss(perfect, gt, {})) == 0.0);

  VarPipelineOutput noisy;
  for (std::size_t i = 0; i < gp.size(); ++i) noisy.outputs.push_back(c(gp[i] + oracle::random_tensor(gp[i].shape(), 10 + i, -0.1, 0.1)));
  const double recon = value(recon_loss(noisy.outputs[0], c(gt)));
  const double pyr = value(pyramid_loss(noisy.outputs, gp));
  CHECK(value(total_loss(noisy, gt, {.lambda1 = 1.0, .lambda2 = 0.0})) == recon);
  CHECK(value(total_loss(noisy, gt, {.lambda1 = 0.5, .lambda2 = 2.0})) == doctest::Approx(0.5 * recon + 2.0 * pyr).epsilon(1e-14));
  CHECK(value(total_loss(noisy, gt, {})) > 0.0);
  CHECK_THROWS_AS(total_loss(noisy, gt, {.lambda1 = -1.0}), std::invalid_argument);
}

TEST_CASE("total loss gradient w.r.t. the outputs matches finite differences") {
  auto gt = oracle::random_tensor({3, 16, 16}, 4, 0, 1);
  auto gp = gaussian_pyramid(gt, 3);
  ParamStore p;
  for (std::size_t i = 0; i < gp.size(); ++i) {
    // Offsets of at least 0.05 keep every entry away from the |.| kink.
    auto off = oracle::random_tensor(gp[i].shape(), 20 + i, 0.05, 0.3);
    for (std::size_t k = 0; k < off.size(); ++k) if (k % 2) off[k] = -off[k];
    p.add("o" + std::to_string(i + 1), gp[i] + off);
  }
  for (auto kind : {ReconKind::L1, ReconKind::L2}) {
    auto fn = [&](const Binder& b) {
      VarPipelineOutput out;
      for (std::size_t i = 0; i < gp.size(); ++i) out.outputs.push_back(b("o" + std::to_string(i + 1)));
      return total_loss(out, gt, {.lambda1 = 1.0, .lambda2 = 1.0, .recon = kind});
    };
    testutil::check_report(grad_check(fn, p, 1e-6, {.step = 1e-3}), 1e-6);
    testutil::check_report(grad_check(fn, p, 1e-4, {.analytic_precision = Precision::F32}), 1e-4);
  }

  // sign(0) = 0 at the kink.
  ParamStore z;
  z.add("o", gt);
  ad::Tape tape;
  Binder b(z, &tape);
  auto g = ad::backward(tape, recon_loss(b("o"), ad::constant(gt)));
  CHECK(max_abs(g.at("o")) == 0.0);
}

TEST_CASE("loss is additive over disjoint pixel sets") {
  auto o = oracle::random_tensor({3, 4, 8}, 30), g = oracle::random_tensor({3, 4, 8}, 31);
  Tensor ol = o, gl = g, orr = o, gr = g;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        if (x < 4) orr.at(ch, y, x) = gr.at(ch, y, x) = 0.0;
        else ol.at(ch, y, x) = gl.at(ch, y, x) = 0.0;
      }
  CHECK(value(recon_loss(c(o), c(g))) ==
        doctest::Approx(value(recon_loss(c(ol), c(gl))) + value(recon_loss(c(orr), c(gr)))).epsilon(1e-14));
}
