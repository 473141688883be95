#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hdft/ops.hpp"
#include "hdft/tensor.hpp"

namespace hdft::ad {

class Tape;

// A value in the computation graph. Real nodes carry `value`, complex nodes
// carry `cvalue`. Complex gradients use the convention g = dL/dRe + i dL/dIm.
struct Node {
  const char* op = "leaf";
  bool is_complex = false;
  bool requires_grad = false;
  Tensor value;
  ComplexTensor cvalue;
  Tensor grad;
  ComplexTensor cgrad;
  bool has_grad = false;
  std::string param_name;  // non-empty for parameter leaves
  std::function<void(Node&)> backward;

  const Shape& shape() const { return is_complex ? cvalue.shape() : value.shape(); }
  void accumulate(const Tensor& g);
  void accumulate(const ComplexTensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node, Tape* tape = nullptr) : node_(std::move(node)), tape_(tape) {}

  const Tensor& value() const { return node_->value; }
  const ComplexTensor& cvalue() const { return node_->cvalue; }
  const Shape& shape() const { return node_->shape(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  bool is_complex() const { return node_->is_complex; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }
  Tape* tape() const { return tape_; }

 private:
  std::shared_ptr<Node> node_;
  Tape* tape_ = nullptr;
};

// Ordered record of differentiable nodes. Creation order is a topological
// order, so backward is a single reverse sweep. Confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(const std::string& name, const Tensor& value);
  void record(const std::shared_ptr<Node>& node) { nodes_.push_back(node); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<Node>>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

class AutodiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using GradMap = std::map<std::string, Tensor>;

// Reverse sweep from a scalar loss. Returns dLoss/dParam for every parameter
// leaf on the tape (zeros where the loss does not depend on the parameter).
GradMap backward(Tape& tape, const Var& loss);

Var constant(Tensor value);
Var constant(ComplexTensor value);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// [1,H,W] gate times [C,H,W].
Var mul_broadcast_channels(const Var& gate, const Var& x);
Var gelu(const Var& x);

// Spatial.
Var conv2d(const Var& x, const Var& kernel, std::size_t stride = 1, PadMode pad = PadMode::Zero);
Var add_bias(const Var& x, const Var& bias);
Var pool2(const Var& x, PoolKind kind);
Var upsample2(const Var& x, std::size_t out_h, std::size_t out_w);
Var softmax(const Var& x, std::size_t axis);
Var reshape(const Var& x, Shape shape);
Var concat_channels(const std::vector<Var>& xs);
Var slice_channels(const Var& x, std::size_t begin, std::size_t end);
Var pad_replicate(const Var& x, std::size_t out_h, std::size_t out_w);
Var crop(const Var& x, std::size_t out_h, std::size_t out_w);
// Per-pixel normalization over channels with learnable per-channel scale and shift.
Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Window layout is carried alongside the [N,C,wH,wW] window tensor.
struct Windows {
  Var windows;
  WindowGrid layout;  // layout.windows is left empty
};
Windows window_partition(const Var& x, std::size_t win_h, std::size_t win_w);
Var window_merge(const Windows& w);

// Complex.
Var to_complex(const Var& x);
Var make_complex(const Var& re, const Var& im);
Var real(const Var& z);
Var fft2(const Var& z);
Var ifft2(const Var& z);
Var hadamard(const Var& a, const Var& b);
// b's shape must equal the trailing dims of a; b is reused for every leading index.
Var hadamard_broadcast(const Var& a, const Var& b);

// A fixed linear map with its adjoint supplied by the caller.
Var linear_map(const Var& x, std::function<Tensor(const Tensor&)> forward,
               std::function<Tensor(const Tensor&)> adjoint, const char* op_name);

// Reductions to shape [1].
Var sum(const Var& x);
Var sum_squares(const Var& x);
// sum |a - b| with sign(0) = 0.
Var l1_distance(const Var& a, const Var& b);
Var sq_distance(const Var& a, const Var& b);

// Non-differentiable: records a node without a backward so a gradient that
// reaches it raises AutodiffError.
Var clamp01(const Var& x);

}  // namespace hdft::ad
