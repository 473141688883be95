#include "hdft/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace hdft {

namespace {

std::string join(const std::string& prefix, const std::string& leaf) { return prefix + "/" + leaf; }

void add_conv(ParamStore& store, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
              std::uint64_t seed, bool zero = false) {
  store.add(join(name, "w"), zero ? Tensor({cout, cin, k, k}) : kaiming_kernel(seed, join(name, "w"), cout, cin, k));
  store.add(join(name, "b"), Tensor({cout}));
}

ad::Var conv(const Binder& b, const std::string& name, const ad::Var& x, std::size_t stride = 1) {
  return ad::add_bias(ad::conv2d(x, b(join(name, "w")), stride, PadMode::Replicate), b(join(name, "b")));
}

ad::Var conv1x1(const Binder& b, const std::string& name, const ad::Var& x) {
  return ad::conv2d(x, b(name));
}

void init_unet_block(ParamStore& store, const std::string& prefix, std::size_t channels, std::uint64_t seed) {
  add_conv(store, join(prefix, "conv"), channels, channels, 3, seed);
}

ad::Var unet_block(const Binder& b, const std::string& prefix, const ad::Var& x) {
  return ad::gelu(conv(b, join(prefix, "conv"), x));
}

void init_stage_blocks(ParamStore& store, const std::string& prefix, std::size_t channels, const RestorerConfig& cfg,
                       std::uint64_t seed) {
  for (std::size_t j = 0; j < cfg.blocks_per_scale; ++j) {
    const auto name = join(prefix, "blk" + std::to_string(j));
    if (cfg.kind == RestorerKind::Hdf) {
      init_hdf_block(store, name, channels, cfg.block, seed);
    } else {
      init_unet_block(store, name, channels, seed);
    }
  }
}

ad::Var stage_blocks(const Binder& b, const std::string& prefix, ad::Var x, const RestorerConfig& cfg) {
  for (std::size_t j = 0; j < cfg.blocks_per_scale; ++j) {
    const auto name = join(prefix, "blk" + std::to_string(j));
    x = cfg.kind == RestorerKind::Hdf ? hdf_block(b, name, x, cfg.block) : unet_block(b, name, x);
  }
  return x;
}

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

template <typename Fn>
Tensor eval_const(const ParamStore& p, const Tensor& x, Fn fn) {
  Binder b(p, nullptr);
  return fn(b, ad::constant(x)).value();
}

}  // namespace

void RestorerConfig::validate() const {
  if (in_channels == 0 || width == 0 || scales == 0 || blocks_per_scale == 0) {
    throw std::invalid_argument("restorer config: channel counts, scales and blocks must be positive");
  }
  if (scales > 6) throw std::invalid_argument("restorer config: at most 6 scales");
  if (block.ffn_expansion == 0 || block.window == 0) {
    throw std::invalid_argument("restorer config: ffn expansion and window must be positive");
  }
}

Tensor kaiming_kernel(std::uint64_t seed, const std::string& name, std::size_t cout, std::size_t cin,
                      std::size_t k) {
  Tensor w({cout, cin, k, k});
  NamedRng rng(seed, name);
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
  for (auto& v : w.vec()) v = rng.uniform(-bound, bound);
  return w;
}

void init_hfa(ParamStore& store, const std::string& prefix, std::size_t channels, std::uint64_t seed) {
  for (const char* leaf : {"wq", "wk", "wv"}) {
    const auto name = join(prefix, leaf);
    store.add(name, kaiming_kernel(seed, name, channels, channels, 1));
  }
  store.add(join(prefix, "wout"), Tensor({channels, channels, 1, 1}));
}

void init_dfffn(ParamStore& store, const std::string& prefix, std::size_t channels, const BlockOptions& opt,
                std::uint64_t seed) {
  const std::size_t hidden = opt.ffn_expansion * channels;
  store.add(join(prefix, "expand"), kaiming_kernel(seed, join(prefix, "expand"), hidden, channels, 1));
  store.add(join(prefix, "q_re"), Tensor({hidden, opt.window, opt.window}, 1.0));
  store.add(join(prefix, "q_im"), Tensor({hidden, opt.window, opt.window}));
  store.add(join(prefix, "reduce"), kaiming_kernel(seed, join(prefix, "reduce"), channels, hidden, 1));
}

void init_hdf_block(ParamStore& store, const std::string& prefix, std::size_t channels, const BlockOptions& opt,
                    std::uint64_t seed) {
  for (const char* ln : {"ln1", "ln2"}) {
    store.add(join(prefix, std::string(ln) + "/gamma"), Tensor({channels}, 1.0));
    store.add(join(prefix, std::string(ln) + "/beta"), Tensor({channels}));
  }
  init_hfa(store, join(prefix, "hfa"), channels, seed);
  init_dfffn(store, join(prefix, "ffn"), channels, opt, seed);
}

void init_restorer(ParamStore& store, const std::string& prefix, const RestorerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t c = cfg.width;
  add_conv(store, join(prefix, "entry"), c, cfg.in_channels, 3, seed);
  for (std::size_t s = 0; s + 1 < cfg.scales; ++s) {
    const std::size_t w = c << s;
    init_stage_blocks(store, join(prefix, "enc" + std::to_string(s)), w, cfg, seed);
    add_conv(store, join(prefix, "down" + std::to_string(s)), 2 * w, w, 3, seed);
  }
  init_stage_blocks(store, join(prefix, "mid"), c << (cfg.scales - 1), cfg, seed);
  for (std::size_t s = cfg.scales - 1; s-- > 0;) {
    const std::size_t w = c << s;
    add_conv(store, join(prefix, "up" + std::to_string(s)), w, 2 * w, 3, seed);
    add_conv(store, join(prefix, "fuse" + std::to_string(s)), w, 2 * w, 1, seed);
    init_stage_blocks(store, join(prefix, "dec" + std::to_string(s)), w, cfg, seed);
  }
  add_conv(store, join(prefix, "exit"), cfg.in_channels, c, 3, seed, /*zero=*/true);
}

ad::Var hfa_branch(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto q = conv1x1(b, join(prefix, "wq"), x);
  auto k = conv1x1(b, join(prefix, "wk"), x);
  auto v = conv1x1(b, join(prefix, "wv"), x);
  auto m = ad::real(ad::ifft2(ad::hadamard(ad::fft2(ad::to_complex(q)), ad::fft2(ad::to_complex(k)))));
  if (opt.scaled_attention) m = ad::scale(m, 1.0 / std::sqrt(static_cast<double>(c)));
  ad::Var attn = opt.channel_softmax ? ad::softmax(m, 0)
                                     : ad::reshape(ad::softmax(ad::reshape(m, {c, h * w}), 1), {c, h, w});
  return conv1x1(b, join(prefix, "wout"), ad::mul(attn, v));
}

ad::Var hfa_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt) {
  return ad::add(hfa_branch(b, prefix, x, opt), x);
}

ad::Var dfffn_branch(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt) {
  auto expanded = conv1x1(b, join(prefix, "expand"), x);
  auto win = ad::window_partition(expanded, opt.window, opt.window);
  auto mask = ad::make_complex(b(join(prefix, "q_re")), b(join(prefix, "q_im")));
  auto filtered = ad::real(ad::ifft2(ad::hadamard_broadcast(ad::fft2(ad::to_complex(win.windows)), mask)));
  auto merged = ad::window_merge({filtered, win.layout});
  return conv1x1(b, join(prefix, "reduce"), merged);
}

ad::Var dfffn_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt) {
  auto out = dfffn_branch(b, prefix, x, opt);
  return opt.dfffn_residual ? ad::add(out, x) : out;
}

ad::Var hdf_block(const Binder& b, const std::string& prefix, const ad::Var& x, const BlockOptions& opt) {
  auto ln = [&](const char* name, const ad::Var& v) {
    return ad::layer_norm_channels(v, b(join(prefix, std::string(name) + "/gamma")),
                                   b(join(prefix, std::string(name) + "/beta")));
  };
  auto h = ad::add(x, hfa_branch(b, join(prefix, "hfa"), ln("ln1", x), opt));
  auto f = dfffn_branch(b, join(prefix, "ffn"), ln("ln2", h), opt);
  return opt.dfffn_residual ? ad::add(h, f) : f;
}

ad::Var restorer_forward(const Binder& b, const std::string& prefix, const ad::Var& x, const RestorerConfig& cfg) {
  require_rank(x.shape(), 3, "restorer input");
  if (x.dim(0) != cfg.in_channels) throw ShapeError("restorer: expected " + std::to_string(cfg.in_channels) + " channels");
  const std::size_t h = x.dim(1), w = x.dim(2);
  if (std::min(h, w) < kMinRestorerSide) {
    throw ShapeError("restorer: input " + shape_str(x.shape()) + " smaller than 8x8");
  }
  const std::size_t m = cfg.pad_multiple();
  auto feat = conv(b, join(prefix, "entry"), ad::pad_replicate(x, round_up(h, m), round_up(w, m)));

  std::vector<ad::Var> skips;
  for (std::size_t s = 0; s + 1 < cfg.scales; ++s) {
    feat = stage_blocks(b, join(prefix, "enc" + std::to_string(s)), feat, cfg);
    skips.push_back(feat);
    feat = conv(b, join(prefix, "down" + std::to_string(s)), feat, 2);
  }
  feat = stage_blocks(b, join(prefix, "mid"), feat, cfg);
  for (std::size_t s = cfg.scales - 1; s-- > 0;) {
    const auto& skip = skips[s];
    auto up = conv(b, join(prefix, "up" + std::to_string(s)), ad::upsample2(feat, skip.dim(1), skip.dim(2)));
    feat = conv(b, join(prefix, "fuse" + std::to_string(s)), ad::concat_channels({up, skip}));
    feat = stage_blocks(b, join(prefix, "dec" + std::to_string(s)), feat, cfg);
  }
  auto out = ad::crop(conv(b, join(prefix, "exit"), feat), h, w);
  return ad::add(out, x);
}

Tensor hfa_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt) {
  return eval_const(p, x, [&](const Binder& b, const ad::Var& v) { return hfa_forward(b, prefix, v, opt); });
}

Tensor dfffn_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt) {
  return eval_const(p, x, [&](const Binder& b, const ad::Var& v) { return dfffn_forward(b, prefix, v, opt); });
}

Tensor hdf_block(const ParamStore& p, const std::string& prefix, const Tensor& x, const BlockOptions& opt) {
  return eval_const(p, x, [&](const Binder& b, const ad::Var& v) { return hdf_block(b, prefix, v, opt); });
}

Tensor restorer_forward(const ParamStore& p, const std::string& prefix, const Tensor& x, const RestorerConfig& cfg) {
  return eval_const(p, x, [&](const Binder& b, const ad::Var& v) { return restorer_forward(b, prefix, v, cfg); });
}

}  // namespace hdft
