#include "hdft/fusion.hpp"

#include <algorithm>

#include "hdft/blocks.hpp"

namespace hdft {

namespace {

ad::Var conv(const Binder& b, const std::string& name, const ad::Var& x) {
  return ad::add_bias(ad::conv2d(x, b(name + "/w"), 1, PadMode::Replicate), b(name + "/b"));
}

void add_conv(ParamStore& store, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
              std::uint64_t seed, bool zero = false) {
  store.add(name + "/w", zero ? Tensor({cout, cin, k, k}) : kaiming_kernel(seed, name + "/w", cout, cin, k));
  store.add(name + "/b", Tensor({cout}));
}

}  // namespace

void init_fusion(ParamStore& store, const std::string& prefix, const FusionConfig& cfg, std::uint64_t seed) {
  add_conv(store, prefix + "/conv1", cfg.width1, 6, 3, seed);
  add_conv(store, prefix + "/conv2", cfg.width2, cfg.width1, 3, seed);
  add_conv(store, prefix + "/skip", cfg.width2, 3 * cfg.width2, 1, seed);
  add_conv(store, prefix + "/head", 2, cfg.width2, 3, seed, /*zero=*/true);
}

FusionResult fusion_forward(const Binder& b, const std::string& prefix, const ad::Var& i1, const ad::Var& i2) {
  require_rank(i1.shape(), 3, "fuse_pair");
  if (i1.shape() != i2.shape()) {
    throw ShapeError("fuse_pair: size mismatch " + shape_str(i1.shape()) + " vs " + shape_str(i2.shape()));
  }
  const std::size_t h = i1.dim(1), w = i1.dim(2);
  auto f = ad::gelu(conv(b, prefix + "/conv1", ad::concat_channels({i1, i2})));
  f = ad::gelu(conv(b, prefix + "/conv2", f));
  auto pooled = ad::concat_channels({ad::pool2(f, PoolKind::Avg), ad::pool2(f, PoolKind::Max)});
  auto merged = ad::concat_channels({ad::upsample2(pooled, h, w), f});
  auto skip = ad::gelu(conv(b, prefix + "/skip", merged));
  auto attention = ad::softmax(conv(b, prefix + "/head", skip), 0);
  auto fused = ad::add(ad::mul_broadcast_channels(ad::slice_channels(attention, 0, 1), i1),
                       ad::mul_broadcast_channels(ad::slice_channels(attention, 1, 2), i2));
  return {attention, fused};
}

Tensor fuse_pair_unclamped(const ParamStore& p, const std::string& prefix, const Tensor& i1, const Tensor& i2) {
  Binder b(p, nullptr);
  return fusion_forward(b, prefix, ad::constant(i1), ad::constant(i2)).fused.value();
}

Tensor fuse_pair(const ParamStore& p, const std::string& prefix, const Tensor& i1, const Tensor& i2) {
  return clamp01(fuse_pair_unclamped(p, prefix, i1, i2));
}

Tensor clamp01(Tensor t) {
  for (auto& v : t.vec()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

}  // namespace hdft
