#include "doctest.h"
#include "hdft/optim.hpp"
#include "hdft/pyramid.hpp"
#include "oracles.hpp"

using namespace hdft;

namespace {

// Direct 5x5 evaluation of the binomial kernel with replicate borders.
Tensor blur_oracle(const Tensor& x) {
  const double k[5] = {1, 4, 6, 4, 1};
  Tensor out(x.shape());
  const long h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (long a = 0; a < 5; ++a)
          for (long b = 0; b < 5; ++b) {
            const long sy = std::clamp(y + a - 2, 0L, h - 1), sx = std::clamp(xx + b - 2, 0L, w - 1);
            acc += k[a] * k[b] * x.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          }
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc / 256.0;
      }
  return out;
}

Tensor smooth_image(std::size_t c, std::size_t h, std::size_t w) {
  Tensor t({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        t.at(ch, y, x) = 0.5 + 0.3 * std::sin(0.05 * static_cast<double>(y) + 0.3 * ch) * std::cos(0.04 * static_cast<double>(x));
  return t;
}

}  // namespace

TEST_CASE("gaussian blur") {
  Tensor c({2, 7, 5}, 0.37);
  CHECK(gaussian_blur(c) == c);

  Tensor impulse({1, 9, 9});
  impulse.at(0, 4, 4) = 1.0;
  CHECK(gaussian_blur(impulse).at(0, 4, 4) == 0.140625);

  auto x = oracle::random_tensor({3, 8, 6}, 1);
  CHECK(max_abs_diff(gaussian_blur(x), blur_oracle(x)) < 1e-15);

  // Channel permutation commutes with the blur.
  Tensor perm({3, 8, 6});
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t c2 = 0; c2 < 3; ++c2)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t xx = 0; xx < 6; ++xx) perm.at(c2, y, xx) = x.at(order[c2], y, xx);
  auto bp = gaussian_blur(perm), bx = gaussian_blur(x);
  for (std::size_t c2 = 0; c2 < 3; ++c2)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t xx = 0; xx < 6; ++xx) CHECK(bp.at(c2, y, xx) == bx.at(order[c2], y, xx));
}

TEST_CASE("pyr_down") {
  Tensor c({1, 8, 8}, 0.6);
  auto d = pyr_down(c);
  CHECK(d.shape() == Shape{1, 4, 4});
  for (auto v : d.vec()) CHECK(v == 0.6);
  CHECK(pyr_down(Tensor({1, 5, 5})).shape() == Shape{1, 3, 3});

  auto x = oracle::random_tensor({1, 6, 6}, 2);
  auto blurred = blur_oracle(x);
  auto got = pyr_down(x);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t xx = 0; xx < 3; ++xx) CHECK(got.at(0, y, xx) == doctest::Approx(blurred.at(0, 2 * y, 2 * xx)).epsilon(1e-14));
}

TEST_CASE("pyr_up") {
  for (auto [h, w, oh, ow] : {std::array<std::size_t, 4>{4, 4, 8, 8}, {3, 3, 5, 5}, {3, 4, 6, 7}}) {
    Tensor c({2, h, w}, 0.45);
    auto up = pyr_up(c, oh, ow);
    CHECK(up.shape() == Shape{2, oh, ow});
    for (auto v : up.vec()) CHECK(v == 0.45);
  }
  CHECK_THROWS_AS(pyr_up(Tensor({1, 4, 4}), 9, 8), ShapeError);

  // Near-identity on heavily blurred content.
  auto smooth = smooth_image(1, 32, 32);
  for (int i = 0; i < 6; ++i) smooth = gaussian_blur(smooth);
  auto back = pyr_down(pyr_up(smooth, 64, 64));
  CHECK(max_abs_diff(back, smooth) < 1e-2);
}

TEST_CASE("pyramid adjoints satisfy the dot-product test") {
  auto x = oracle::random_tensor({2, 7, 6}, 3);
  auto d = pyr_down(x);
  auto gd = oracle::random_tensor(d.shape(), 4);
  CHECK(sum(d * gd) == doctest::Approx(sum(x * pyr_down_adjoint(gd, x.shape()))).epsilon(1e-12));
  auto s = oracle::random_tensor({2, 4, 3}, 5);
  auto u = pyr_up(s, 7, 6);
  auto gu = oracle::random_tensor(u.shape(), 6);
  CHECK(sum(u * gu) == doctest::Approx(sum(s * pyr_up_adjoint(gu, s.shape()))).epsilon(1e-12));
}

TEST_CASE("decompose and reconstruct") {
  Tensor c({3, 64, 64}, 0.3);
  auto pc = decompose(c, 4);
  for (const auto& r : pc.residuals)
    for (auto v : r.vec()) CHECK(v == 0.0);
  for (auto v : pc.base.vec()) CHECK(v == 0.3);

  auto x8 = oracle::random_tensor({1, 32, 32}, 7);
  auto p2 = decompose(x8, 2);
  CHECK(p2.residuals.size() == 1);
  CHECK(max_abs_diff(p2.residuals[0], x8 - pyr_up(pyr_down(x8), 32, 32)) == 0.0);

  auto x = oracle::random_tensor({3, 64, 64}, 8, 0, 1);
  auto p = decompose(x, 4);
  CHECK(p.residuals[0].dim(1) == 64);
  CHECK(p.residuals[1].dim(1) == 32);
  CHECK(p.residuals[2].dim(1) == 16);
  CHECK(p.base.dim(1) == 8);
  CHECK(max_abs_diff(reconstruct(p), x) < 1e-9);

  auto odd = oracle::random_tensor({3, 37, 45}, 9);
  CHECK(max_abs_diff(reconstruct(decompose(odd, 3)), odd) < 1e-9);

  CHECK_THROWS_AS(decompose(Tensor({3, 31, 64}), 4), ShapeError);
  CHECK_THROWS_AS(decompose(x, 1), ShapeError);
}

TEST_CASE("zeroing pyramid parts") {
  auto x = oracle::random_tensor({1, 64, 64}, 10, 0, 1);
  auto p = decompose(x, 4);

  // Base only: the coarse approximation, i.e. the upsampled base.
  auto base_only = p;
  for (auto& r : base_only.residuals) r.fill(0.0);
  auto coarse = reconstruct(base_only);
  auto expect = pyr_up(pyr_up(pyr_up(p.base, 16, 16), 32, 32), 64, 64);
  CHECK(max_abs_diff(coarse, expect) < 1e-12);
  CHECK(max_abs_diff(coarse, gaussian_blur(x)) > 1e-3);  // much smoother than x

  // Linearity: zeroing the base leaves x minus its coarse approximation.
  auto no_base = p;
  no_base.base.fill(0.0);
  CHECK(max_abs_diff(reconstruct(no_base), x - coarse) < 1e-12);
}

TEST_CASE("decomposition is linear") {
  auto x = oracle::random_tensor({2, 32, 40}, 11);
  auto y = oracle::random_tensor({2, 32, 40}, 12);
  const double a = 0.8, b = -1.7;
  auto pl = decompose(a * x + b * y, 3);
  auto px = decompose(x, 3), py = decompose(y, 3);
  for (std::size_t k = 0; k < 2; ++k) CHECK(max_abs_diff(pl.residuals[k], a * px.residuals[k] + b * py.residuals[k]) < 1e-12);
  CHECK(max_abs_diff(pl.base, a * px.base + b * py.base) < 1e-12);
}

TEST_CASE("differentiable pyramid ops match finite differences") {
  ParamStore params;
  params.add("x", oracle::random_tensor({2, 32, 36}, 13));
  auto proj = oracle::random_tensor({2, 32, 36}, 14);
  auto report = grad_check(
      [&](const Binder& b) {
        auto p = decompose(b("x"), 3);
        auto rec = pyr_up(pyr_up(ad::scale(p.base, 2.0), 16, 18), 32, 36);
        auto s = ad::add(ad::sum(ad::mul(rec, ad::constant(proj))), ad::sum_squares(p.residuals[1]));
        return ad::add(s, ad::sum_squares(p.residuals[0]));
      },
      params, 1e-6, {.max_entries_per_param = 200});
  CHECK(report.worst() < 1e-6);
}
