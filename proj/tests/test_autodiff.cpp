#include <cmath>

#include "doctest.h"
#include "hdft/autodiff.hpp"
#include "hdft/fft.hpp"
#include "hdft/optim.hpp"
#include "oracles.hpp"

using namespace hdft;

namespace {

ParamStore store_of(std::initializer_list<std::pair<const char*, Tensor>> items) {
  ParamStore s;
  for (const auto& [n, t] : items) s.add(n, t);
  return s;
}

void check_report(const GradCheckReport& r, double tol) {
  for (const auto& e : r.entries) {
    INFO(e.name << " rel=" << e.max_rel_error << " scale=" << e.grad_scale);
    CHECK(e.max_rel_error < tol);
  }
}

}  // namespace

TEST_CASE("gradient of a plain sum is all ones") {
  auto params = store_of({{"x", oracle::random_tensor({2, 3, 4}, 1)}});
  ad::Tape tape;
  Binder bind(params, &tape);
  auto grads = ad::backward(tape, ad::sum(bind("x")));
  for (auto v : grads.at("x").vec()) CHECK(v == 1.0);
}

TEST_CASE("squared conv output matches finite differences") {
  auto params = store_of({{"x", oracle::random_tensor({2, 6, 5}, 2)}, {"k", oracle::random_tensor({3, 2, 3, 3}, 3)}});
  auto report = grad_check(
      [](const Binder& b) { return ad::sum_squares(ad::conv2d(b("x"), b("k"), 1, PadMode::Replicate)); }, params,
      1e-6);
  check_report(report, 1e-6);
}

TEST_CASE("frequency-domain filtering matches finite differences on input and mask") {
  auto params = store_of({{"x", oracle::random_tensor({1, 6, 6}, 4)},
                          {"q_re", oracle::random_tensor({1, 6, 6}, 5)},
                          {"q_im", oracle::random_tensor({1, 6, 6}, 6)}});
  auto report = grad_check(
      [](const Binder& b) {
        auto q = ad::make_complex(b("q_re"), b("q_im"));
        auto filtered = ad::real(ad::ifft2(ad::hadamard(ad::fft2(ad::to_complex(b("x"))), q)));
        return ad::sum_squares(filtered);
      },
      params, 1e-6);
  CHECK(report.entries.size() == 3);
  check_report(report, 1e-6);
}

TEST_CASE("every registered op passes finite differences in 64-bit") {
  auto x = oracle::random_tensor({3, 5, 6}, 7);
  auto w = oracle::random_tensor({3, 5, 6}, 8);  // fixed random projection for the loss
  auto probe = [&](const char* name, auto op) {
    {
      INFO(name);
      auto params = store_of({{"x", x}});
      auto report = grad_check(
          [&](const Binder& b) {
            ad::Var y = op(b("x"));
            auto proj = oracle::random_tensor(y.shape(), 99);
            return ad::sum(ad::mul(y, ad::constant(proj)));
          },
          params, 1e-6);
      check_report(report, 1e-6);
    }
  };
  probe("add", [&](const ad::Var& v) { return ad::add(v, ad::mul(v, v)); });
  probe("sub", [&](const ad::Var& v) { return ad::sub(ad::constant(w), ad::mul(v, v)); });
  probe("scale", [](const ad::Var& v) { return ad::scale(v, -2.5); });
  probe("gelu", [](const ad::Var& v) { return ad::gelu(v); });
  probe("avg_pool", [](const ad::Var& v) { return ad::pool2(v, PoolKind::Avg); });
  probe("max_pool", [](const ad::Var& v) { return ad::pool2(v, PoolKind::Max); });
  probe("upsample", [](const ad::Var& v) { return ad::upsample2(v, 9, 12); });
  probe("softmax_spatial", [](const ad::Var& v) {
    return ad::reshape(ad::softmax(ad::reshape(v, {3, 30}), 1), {3, 5, 6});
  });
  probe("softmax_channels", [](const ad::Var& v) { return ad::softmax(v, 0); });
  probe("pad_crop", [](const ad::Var& v) { return ad::crop(ad::pad_replicate(v, 8, 8), 4, 7); });
  probe("slice_concat", [](const ad::Var& v) {
    return ad::concat_channels({ad::slice_channels(v, 1, 3), v, ad::slice_channels(v, 0, 1)});
  });
  probe("gate", [](const ad::Var& v) { return ad::mul_broadcast_channels(ad::slice_channels(v, 2, 3), v); });
  probe("windows", [](const ad::Var& v) {
    auto win = ad::window_partition(v, 4, 4);
    return ad::window_merge({ad::scale(win.windows, 1.5), win.layout});
  });
  probe("fft_roundtrip", [](const ad::Var& v) { return ad::real(ad::ifft2(ad::fft2(ad::to_complex(v)))); });
  probe("strided_conv", [](const ad::Var& v) {
    return ad::conv2d(v, ad::constant(oracle::random_tensor({2, 3, 3, 3}, 9)), 2, PadMode::Zero);
  });
  probe("l1", [&](const ad::Var& v) { return ad::l1_distance(v, ad::constant(w)); });
  probe("l2", [&](const ad::Var& v) { return ad::sq_distance(v, ad::constant(w)); });
}

TEST_CASE("layer norm, bias and broadcast hadamard parameters") {
  auto params = store_of({{"x", oracle::random_tensor({4, 3, 5}, 10)},
                          {"gamma", oracle::random_tensor({4}, 11)},
                          {"beta", oracle::random_tensor({4}, 12)},
                          {"bias", oracle::random_tensor({4}, 13)},
                          {"m_re", oracle::random_tensor({4, 4, 4}, 14)},
                          {"m_im", oracle::random_tensor({4, 4, 4}, 15)}});
  auto proj = oracle::random_tensor({4, 3, 5}, 16);
  auto report = grad_check(
      [&](const Binder& b) {
        auto y = ad::add_bias(ad::layer_norm_channels(b("x"), b("gamma"), b("beta")), b("bias"));
        auto win = ad::window_partition(y, 4, 4);
        auto f = ad::hadamard_broadcast(ad::fft2(ad::to_complex(win.windows)), ad::make_complex(b("m_re"), b("m_im")));
        auto z = ad::window_merge({ad::real(ad::ifft2(f)), win.layout});
        return ad::sum(ad::mul(z, ad::constant(proj)));
      },
      params, 1e-6);
  check_report(report, 1e-6);
}

TEST_CASE("gradient is linear in the loss") {
  auto params = store_of({{"x", oracle::random_tensor({2, 4, 4}, 17)}, {"k", oracle::random_tensor({2, 2, 3, 3}, 18)}});
  auto loss_a = [](const Binder& b) { return ad::sum_squares(ad::conv2d(b("x"), b("k"))); };
  auto loss_b = [](const Binder& b) { return ad::sum(ad::gelu(b("x"))); };
  auto grads_of = [&](auto fn) {
    ad::Tape tape;
    return ad::backward(tape, fn(Binder(params, &tape)));
  };
  auto ga = grads_of(loss_a), gb = grads_of(loss_b);
  auto gsum = grads_of([&](const Binder& b) { return ad::add(loss_a(b), loss_b(b)); });
  for (const auto& [name, g] : gsum) {
    Tensor expect = ga.at(name);
    if (gb.count(name)) expect += gb.at(name);
    CHECK(max_abs_diff(g, expect) < 1e-12);
  }
}

TEST_CASE("backward error paths") {
  auto params = store_of({{"x", oracle::random_tensor({1, 2, 2}, 19)}});
  ad::Tape tape;
  Binder b(params, &tape);
  auto x = b("x");
  CHECK_THROWS_AS(ad::backward(tape, x), ad::AutodiffError);
  CHECK_THROWS_AS(ad::backward(tape, ad::sum(ad::clamp01(x))), ad::AutodiffError);
}

TEST_CASE("tape records in topological order and grads are zero for unused params") {
  auto params = store_of({{"x", oracle::random_tensor({1, 2, 2}, 20)}, {"unused", Tensor({3}, 1.0)}});
  ad::Tape tape;
  Binder b(params, &tape);
  auto y = ad::sum(ad::mul(b("x"), b("x")));
  b("unused");
  auto g = ad::backward(tape, y);
  CHECK(max_abs(g.at("unused")) == 0.0);
  CHECK(max_abs_diff(g.at("x"), 2.0 * params.get("x")) < 1e-15);
}

TEST_CASE("adam first step, zero gradient and convergence") {
  ParamStore p;
  p.add("w", Tensor({1}, 0.0));
  AdamState st;
  adam_step(p, {{"w", Tensor({1}, 1.0)}}, st);
  // m_hat = g = 1 and v_hat = g^2 = 1, so the step is lr / (1 + eps).
  CHECK(std::abs(p.get("w")[0] + st.config.lr / (1.0 + st.config.eps)) < 1e-18);
  CHECK(st.step == 1);

  ParamStore q;
  q.add("w", Tensor({1}, 0.5));
  AdamState zst;
  adam_step(q, {{"w", Tensor({1}, 0.0)}}, zst);
  CHECK(q.get("w")[0] == 0.5);
  CHECK(zst.step == 1);

  ParamStore r;
  r.add("w", Tensor({1}, 0.0));
  AdamState cst;
  cst.config.lr = 0.1;
  int steps = 0;
  for (; steps < 500 && std::abs(r.get("w")[0] - 3.0) >= 1e-3; ++steps) {
    adam_step(r, {{"w", Tensor({1}, 2.0 * (r.get("w")[0] - 3.0))}}, cst);
  }
  CHECK(std::abs(r.get("w")[0] - 3.0) < 1e-3);
  CHECK(steps <= 500);

  CHECK_THROWS_AS(adam_step(r, {{"w", Tensor({2}, 0.0)}}, cst), ShapeError);
}

TEST_CASE("grad_check is exact for linear functions") {
  auto params = store_of({{"x", oracle::random_tensor({3, 4, 4}, 21)}});
  auto proj = oracle::random_tensor({3, 4, 4}, 22);
  auto report = grad_check([&](const Binder& b) { return ad::sum(ad::mul(b("x"), ad::constant(proj))); }, params,
                           1e-10);
  CHECK(report.passed());
  CHECK(report.entries[0].checked == 48);
}
