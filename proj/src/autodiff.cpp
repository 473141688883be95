#include "hdft/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "hdft/fft.hpp"

namespace hdft::ad {

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad += g;
  }
}

void Node::accumulate(const ComplexTensor& g) {
  if (!requires_grad) return;
  if (!has_grad) {
    cgrad = g;
    has_grad = true;
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) cgrad[i] += g[i];
  }
}

Var Tape::param(const std::string& name, const Tensor& value) {
  auto n = std::make_shared<Node>();
  n->op = "param";
  n->value = value;
  n->requires_grad = true;
  n->param_name = name;
  record(n);
  return Var(n, this);
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->op = "constant";
  n->value = std::move(value);
  return Var(n);
}

Var constant(ComplexTensor value) {
  auto n = std::make_shared<Node>();
  n->op = "constant";
  n->is_complex = true;
  n->cvalue = std::move(value);
  return Var(n);
}

namespace {

Tape* tape_of(std::initializer_list<const Var*> inputs) {
  for (const Var* v : inputs) {
    if (v->requires_grad() && v->tape() != nullptr) return v->tape();
  }
  return nullptr;
}

template <typename Value, typename Backward>
Var make_node(const char* op, std::initializer_list<const Var*> inputs, Value value, Backward bw) {
  auto n = std::make_shared<Node>();
  n->op = op;
  if constexpr (std::is_same_v<Value, ComplexTensor>) {
    n->is_complex = true;
    n->cvalue = std::move(value);
  } else {
    n->value = std::move(value);
  }
  Tape* tape = tape_of(inputs);
  if (tape == nullptr) return Var(n);
  n->requires_grad = true;
  n->backward = std::move(bw);
  tape->record(n);
  return Var(n, tape);
}

Tape* tape_of_list(const std::vector<Var>& xs) {
  for (const auto& v : xs) {
    if (v.requires_grad() && v.tape() != nullptr) return v.tape();
  }
  return nullptr;
}

void require_real(const Var& v, const char* what) {
  if (v.is_complex()) throw ShapeError(std::string(what) + ": expected a real tensor");
}
void require_complex(const Var& v, const char* what) {
  if (!v.is_complex()) throw ShapeError(std::string(what) + ": expected a complex tensor");
}

Tensor scalar_tensor(double v) { return Tensor({1}, v); }

}  // namespace

GradMap backward(Tape& tape, const Var& loss) {
  if (!loss.defined() || loss.is_complex() || shape_numel(loss.shape()) != 1) {
    throw AutodiffError("backward: loss must be a real scalar");
  }
  for (const auto& n : tape.nodes()) n->has_grad = false;
  GradMap grads;
  if (loss.requires_grad()) {
    loss.node().accumulate(Tensor(loss.shape(), 1.0));
    const auto& nodes = tape.nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      Node& n = **it;
      if (!n.has_grad) continue;
      if (n.backward) {
        n.backward(n);
      } else if (n.param_name.empty()) {
        throw AutodiffError(std::string("backward: op '") + n.op + "' has no registered backward");
      }
    }
  }
  for (const auto& n : tape.nodes()) {
    if (n->param_name.empty()) continue;
    Tensor g = n->has_grad ? n->grad : Tensor(n->value.shape());
    auto [it, inserted] = grads.emplace(n->param_name, g);
    if (!inserted) it->second += g;
  }
  return grads;
}

Var add(const Var& a, const Var& b) {
  require_real(a, "add");
  return make_node("add", {&a, &b}, a.value() + b.value(), [a, b](Node& self) {
    a.node().accumulate(self.grad);
    b.node().accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_real(a, "sub");
  return make_node("sub", {&a, &b}, a.value() - b.value(), [a, b](Node& self) {
    a.node().accumulate(self.grad);
    b.node().accumulate(-1.0 * self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_real(a, "mul");
  return make_node("mul", {&a, &b}, a.value() * b.value(), [a, b](Node& self) {
    if (a.requires_grad()) a.node().accumulate(self.grad * b.value());
    if (b.requires_grad()) b.node().accumulate(self.grad * a.value());
  });
}

Var scale(const Var& a, double s) {
  require_real(a, "scale");
  return make_node("scale", {&a}, s * a.value(), [a, s](Node& self) { a.node().accumulate(s * self.grad); });
}

Var mul_broadcast_channels(const Var& gate, const Var& x) {
  require_rank(gate.shape(), 3, "mul_broadcast_channels gate");
  require_rank(x.shape(), 3, "mul_broadcast_channels input");
  if (gate.dim(0) != 1 || gate.dim(1) != x.dim(1) || gate.dim(2) != x.dim(2)) {
    throw ShapeError("mul_broadcast_channels: gate " + shape_str(gate.shape()) + " vs " +
                     shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = gate.value()[i] * x.value()[ch * plane + i];
  round_to_precision(out);
  return make_node("mul_broadcast_channels", {&gate, &x}, std::move(out), [gate, x, c, plane](Node& self) {
    if (gate.requires_grad()) {
      Tensor gg(gate.shape());
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) gg[i] += self.grad[ch * plane + i] * x.value()[ch * plane + i];
      round_to_precision(gg);
      gate.node().accumulate(gg);
    }
    if (x.requires_grad()) {
      Tensor gx(x.shape());
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] = self.grad[ch * plane + i] * gate.value()[i];
      round_to_precision(gx);
      x.node().accumulate(gx);
    }
  });
}

namespace {
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
}  // namespace

Var gelu(const Var& x) {
  require_real(x, "gelu");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * normal_cdf(x.value()[i]);
  round_to_precision(out);
  return make_node("gelu", {&x}, std::move(out), [x](Node& self) {
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = x.value()[i];
      gx[i] = self.grad[i] * (normal_cdf(v) + v * normal_pdf(v));
    }
    round_to_precision(gx);
    x.node().accumulate(gx);
  });
}

Var conv2d(const Var& x, const Var& kernel, std::size_t stride, PadMode pad) {
  require_real(x, "conv2d");
  return make_node("conv2d", {&x, &kernel}, hdft::conv2d(x.value(), kernel.value(), stride, pad),
                   [x, kernel, stride, pad](Node& self) {
                     if (x.requires_grad()) {
                       x.node().accumulate(
                           conv2d_grad_input(self.grad, kernel.value(), x.shape(), stride, pad));
                     }
                     if (kernel.requires_grad()) {
                       kernel.node().accumulate(
                           conv2d_grad_kernel(self.grad, x.value(), kernel.shape(), stride, pad));
                     }
                   });
}

Var add_bias(const Var& x, const Var& bias) {
  return make_node("add_bias", {&x, &bias}, add_channel_bias(x.value(), bias.value()), [x, bias](Node& self) {
    x.node().accumulate(self.grad);
    if (bias.requires_grad()) {
      Tensor gb(bias.shape());
      const std::size_t plane = x.dim(1) * x.dim(2);
      for (std::size_t c = 0; c < x.dim(0); ++c)
        for (std::size_t i = 0; i < plane; ++i) gb[c] += self.grad[c * plane + i];
      round_to_precision(gb);
      bias.node().accumulate(gb);
    }
  });
}

Var pool2(const Var& x, PoolKind kind) {
  return make_node(kind == PoolKind::Max ? "max_pool2" : "avg_pool2", {&x}, hdft::pool2(x.value(), kind),
                   [x, kind](Node& self) { x.node().accumulate(pool2_grad(self.grad, x.value(), kind)); });
}

Var upsample2(const Var& x, std::size_t out_h, std::size_t out_w) {
  return make_node("upsample2", {&x}, hdft::upsample2(x.value(), out_h, out_w),
                   [x](Node& self) { x.node().accumulate(upsample2_grad(self.grad, x.shape())); });
}

Var softmax(const Var& x, std::size_t axis) {
  auto y = hdft::softmax(x.value(), axis);
  // The closure reads the output from the node itself to avoid a second copy.
  return make_node("softmax", {&x}, std::move(y),
                   [x, axis](Node& self) { x.node().accumulate(softmax_grad(self.grad, self.value, axis)); });
}

Var reshape(const Var& x, Shape shape) {
  require_real(x, "reshape");
  const Shape original = x.shape();
  return make_node("reshape", {&x}, x.value().reshaped(std::move(shape)),
                   [x, original](Node& self) { x.node().accumulate(self.grad.reshaped(original)); });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const std::size_t h = xs[0].dim(1), w = xs[0].dim(2);
  std::size_t total = 0;
  for (const auto& v : xs) {
    require_rank(v.shape(), 3, "concat_channels");
    if (v.dim(1) != h || v.dim(2) != w) throw ShapeError("concat_channels: spatial mismatch");
    total += v.dim(0);
  }
  Tensor out({total, h, w});
  std::size_t off = 0;
  for (const auto& v : xs) {
    std::copy(v.value().vec().begin(), v.value().vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(off));
    off += v.value().size();
  }
  auto n = std::make_shared<Node>();
  n->op = "concat_channels";
  n->value = std::move(out);
  Tape* tape = tape_of_list(xs);
  if (tape == nullptr) return Var(n);
  n->requires_grad = true;
  n->backward = [xs](Node& self) {
    std::size_t o = 0;
    for (const auto& v : xs) {
      const std::size_t len = v.value().size();
      if (v.requires_grad()) {
        Tensor g(v.shape());
        std::copy(self.grad.vec().begin() + static_cast<std::ptrdiff_t>(o),
                  self.grad.vec().begin() + static_cast<std::ptrdiff_t>(o + len), g.vec().begin());
        v.node().accumulate(g);
      }
      o += len;
    }
  };
  tape->record(n);
  return Var(n, tape);
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t end) {
  require_rank(x.shape(), 3, "slice_channels");
  if (begin >= end || end > x.dim(0)) throw ShapeError("slice_channels: bad channel range");
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor out({end - begin, x.dim(1), x.dim(2)});
  std::copy(x.value().vec().begin() + static_cast<std::ptrdiff_t>(begin * plane),
            x.value().vec().begin() + static_cast<std::ptrdiff_t>(end * plane), out.vec().begin());
  return make_node("slice_channels", {&x}, std::move(out), [x, begin, plane](Node& self) {
    Tensor g(x.shape());
    std::copy(self.grad.vec().begin(), self.grad.vec().end(),
              g.vec().begin() + static_cast<std::ptrdiff_t>(begin * plane));
    x.node().accumulate(g);
  });
}

Var pad_replicate(const Var& x, std::size_t out_h, std::size_t out_w) {
  return make_node("pad_replicate", {&x}, hdft::pad_replicate(x.value(), out_h, out_w),
                   [x](Node& self) { x.node().accumulate(pad_replicate_grad(self.grad, x.shape())); });
}

Var crop(const Var& x, std::size_t out_h, std::size_t out_w) {
  return make_node("crop", {&x}, hdft::crop(x.value(), out_h, out_w),
                   [x](Node& self) { x.node().accumulate(crop_grad(self.grad, x.shape())); });
}

Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank(x.shape(), 3, "layer_norm_channels");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw ShapeError("layer_norm_channels: scale/shift length must equal channel count");
  }
  Tensor xhat(x.shape());
  std::vector<double> inv_std(plane);
  const auto& xv = x.value();
  for (std::size_t p = 0; p < plane; ++p) {
    double mean = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) mean += xv[ch * plane + p];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = xv[ch * plane + p] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[p] = 1.0 / std::sqrt(var + eps);
    for (std::size_t ch = 0; ch < c; ++ch) xhat[ch * plane + p] = (xv[ch * plane + p] - mean) * inv_std[p];
  }
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p)
      out[ch * plane + p] = gamma.value()[ch] * xhat[ch * plane + p] + beta.value()[ch];
  round_to_precision(out);
  return make_node("layer_norm_channels", {&x, &gamma, &beta}, std::move(out),
                   [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), c, plane](Node& self) {
                     const auto& g = self.grad;
                     if (gamma.requires_grad() || beta.requires_grad()) {
                       Tensor gg(gamma.shape()), gb(beta.shape());
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         for (std::size_t p = 0; p < plane; ++p) {
                           gg[ch] += g[ch * plane + p] * xhat[ch * plane + p];
                           gb[ch] += g[ch * plane + p];
                         }
                       }
                       round_to_precision(gg);
                       round_to_precision(gb);
                       gamma.node().accumulate(gg);
                       beta.node().accumulate(gb);
                     }
                     if (!x.requires_grad()) return;
                     Tensor gx(x.shape());
                     const double inv_c = 1.0 / static_cast<double>(c);
                     for (std::size_t p = 0; p < plane; ++p) {
                       double mean_g = 0.0, mean_gx = 0.0;
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         const double gh = g[ch * plane + p] * gamma.value()[ch];
                         mean_g += gh;
                         mean_gx += gh * xhat[ch * plane + p];
                       }
                       mean_g *= inv_c;
                       mean_gx *= inv_c;
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         const double gh = g[ch * plane + p] * gamma.value()[ch];
                         gx[ch * plane + p] = inv_std[p] * (gh - mean_g - xhat[ch * plane + p] * mean_gx);
                       }
                     }
                     round_to_precision(gx);
                     x.node().accumulate(gx);
                   });
}

Windows window_partition(const Var& x, std::size_t win_h, std::size_t win_w) {
  require_real(x, "window_partition");
  WindowGrid grid = hdft::window_partition(x.value(), win_h, win_w);
  Tensor windows = std::move(grid.windows);
  grid.windows = Tensor();
  Windows out;
  out.layout = grid;
  out.windows = make_node("window_partition", {&x}, std::move(windows), [x, grid](Node& self) {
    x.node().accumulate(hdft::window_merge(self.grad, grid));
  });
  return out;
}

Var window_merge(const Windows& w) {
  const Var& win = w.windows;
  const WindowGrid layout = w.layout;
  return make_node("window_merge", {&win}, hdft::window_merge(win.value(), layout), [win, layout](Node& self) {
    win.node().accumulate(hdft::window_partition(self.grad, layout.win_h, layout.win_w).windows);
  });
}

Var to_complex(const Var& x) {
  require_real(x, "to_complex");
  return make_node("to_complex", {&x}, hdft::to_complex(x.value()),
                   [x](Node& self) { x.node().accumulate(real_part(self.cgrad)); });
}

Var make_complex(const Var& re, const Var& im) {
  require_real(re, "make_complex");
  require_real(im, "make_complex");
  require_same_shape(re.shape(), im.shape(), "make_complex");
  ComplexTensor z(re.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = Complex(re.value()[i], im.value()[i]);
  return make_node("make_complex", {&re, &im}, std::move(z), [re, im](Node& self) {
    re.node().accumulate(real_part(self.cgrad));
    im.node().accumulate(imag_part(self.cgrad));
  });
}

Var real(const Var& z) {
  require_complex(z, "real");
  return make_node("real", {&z}, real_part(z.cvalue()),
                   [z](Node& self) { z.node().accumulate(hdft::to_complex(self.grad)); });
}

Var fft2(const Var& z) {
  require_complex(z, "fft2");
  // Adjoint of the unnormalized DFT is H*W times the normalized inverse.
  return make_node("fft2", {&z}, hdft::fft2(z.cvalue()), [z](Node& self) {
    const auto& s = self.cgrad.shape();
    const double hw = static_cast<double>(s[s.size() - 1] * s[s.size() - 2]);
    ComplexTensor g = hdft::ifft2(self.cgrad);
    for (auto& v : g.vec()) v *= hw;
    round_to_precision(g);
    z.node().accumulate(g);
  });
}

Var ifft2(const Var& z) {
  require_complex(z, "ifft2");
  return make_node("ifft2", {&z}, hdft::ifft2(z.cvalue()), [z](Node& self) {
    const auto& s = self.cgrad.shape();
    const double inv_hw = 1.0 / static_cast<double>(s[s.size() - 1] * s[s.size() - 2]);
    ComplexTensor g = hdft::fft2(self.cgrad);
    for (auto& v : g.vec()) v *= inv_hw;
    round_to_precision(g);
    z.node().accumulate(g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_complex(a, "hadamard");
  require_complex(b, "hadamard");
  return make_node("hadamard", {&a, &b}, complex_hadamard(a.cvalue(), b.cvalue()), [a, b](Node& self) {
    const auto& g = self.cgrad;
    if (a.requires_grad()) {
      ComplexTensor ga(a.shape());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * std::conj(b.cvalue()[i]);
      round_to_precision(ga);
      a.node().accumulate(ga);
    }
    if (b.requires_grad()) {
      ComplexTensor gb(b.shape());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * std::conj(a.cvalue()[i]);
      round_to_precision(gb);
      b.node().accumulate(gb);
    }
  });
}

Var hadamard_broadcast(const Var& a, const Var& b) {
  require_complex(a, "hadamard_broadcast");
  require_complex(b, "hadamard_broadcast");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
    throw ShapeError("hadamard_broadcast: " + shape_str(bs) + " is not a suffix of " + shape_str(as));
  }
  const std::size_t inner = b.cvalue().size();
  const std::size_t outer = a.cvalue().size() / inner;
  ComplexTensor out(as);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = a.cvalue()[o * inner + i] * b.cvalue()[i];
  round_to_precision(out);
  return make_node("hadamard_broadcast", {&a, &b}, std::move(out), [a, b, inner, outer](Node& self) {
    const auto& g = self.cgrad;
    if (a.requires_grad()) {
      ComplexTensor ga(a.shape());
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) ga[o * inner + i] = g[o * inner + i] * std::conj(b.cvalue()[i]);
      round_to_precision(ga);
      a.node().accumulate(ga);
    }
    if (b.requires_grad()) {
      ComplexTensor gb(b.shape());
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i] * std::conj(a.cvalue()[o * inner + i]);
      round_to_precision(gb);
      b.node().accumulate(gb);
    }
  });
}

Var linear_map(const Var& x, std::function<Tensor(const Tensor&)> forward,
               std::function<Tensor(const Tensor&)> adjoint, const char* op_name) {
  require_real(x, op_name);
  Tensor y = forward(x.value());
  return make_node(op_name, {&x}, std::move(y),
                   [x, adjoint = std::move(adjoint)](Node& self) { x.node().accumulate(adjoint(self.grad)); });
}

Var sum(const Var& x) {
  require_real(x, "sum");
  return make_node("sum", {&x}, scalar_tensor(hdft::sum(x.value())),
                   [x](Node& self) { x.node().accumulate(Tensor(x.shape(), self.grad[0])); });
}

Var sum_squares(const Var& x) {
  require_real(x, "sum_squares");
  double s = 0.0;
  for (auto v : x.value().vec()) s += v * v;
  return make_node("sum_squares", {&x}, scalar_tensor(s),
                   [x](Node& self) { x.node().accumulate((2.0 * self.grad[0]) * x.value()); });
}

namespace {
double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace

Var l1_distance(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "l1_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += std::abs(a.value()[i] - b.value()[i]);
  return make_node("l1_distance", {&a, &b}, scalar_tensor(s), [a, b](Node& self) {
    Tensor g(a.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[0] * sign0(a.value()[i] - b.value()[i]);
    if (a.requires_grad()) a.node().accumulate(g);
    if (b.requires_grad()) b.node().accumulate(-1.0 * g);
  });
}

Var sq_distance(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "sq_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_node("sq_distance", {&a, &b}, scalar_tensor(s), [a, b](Node& self) {
    Tensor g(a.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * self.grad[0] * (a.value()[i] - b.value()[i]);
    if (a.requires_grad()) a.node().accumulate(g);
    if (b.requires_grad()) b.node().accumulate(-1.0 * g);
  });
}

Var clamp01(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.vec()) v = std::clamp(v, 0.0, 1.0);
  auto n = std::make_shared<Node>();
  n->op = "clamp01";
  n->value = std::move(out);
  if (!x.requires_grad() || x.tape() == nullptr) return Var(n);
  n->requires_grad = true;
  x.tape()->record(n);
  return Var(n, x.tape());
}

}  // namespace hdft::ad
