#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hdft/autodiff.hpp"
#include "hdft/tensor.hpp"

namespace hdft {

// Named tensors in insertion order; names are unique.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  void set(const std::string& name, Tensor value);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  std::size_t scalar_count() const;
  std::size_t scalar_count(const std::string& prefix) const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Resolves parameter names to graph leaves. With a tape every lookup becomes a
// differentiable parameter node; without one, a constant.
class Binder {
 public:
  Binder(const ParamStore& store, ad::Tape* tape) : store_(store), tape_(tape) {}
  ad::Var operator()(const std::string& name) const;
  ad::Tape* tape() const { return tape_; }

 private:
  const ParamStore& store_;
  ad::Tape* tape_;
};

// Deterministic per-tensor generator: the stream for a tensor depends only on
// (seed, name), so initialization is independent of creation order.
class NamedRng {
 public:
  NamedRng(std::uint64_t seed, const std::string& name);
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a(const std::string& s);

}  // namespace hdft
