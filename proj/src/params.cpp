#include "hdft/params.hpp"

#include <cmath>
#include <numbers>

namespace hdft {

void ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second].second;
}

void ParamStore::set(const std::string& name, Tensor value) {
  Tensor& t = get(name);
  require_same_shape(t.shape(), value.shape(), name.c_str());
  t = std::move(value);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

std::size_t ParamStore::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) {
    if (name.rfind(prefix, 0) == 0) n += t.size();
  }
  return n;
}

ad::Var Binder::operator()(const std::string& name) const {
  const Tensor& t = store_.get(name);
  if (tape_ != nullptr) return tape_->param(name, t);
  return ad::constant(t);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

NamedRng::NamedRng(std::uint64_t seed, const std::string& name)
    : state_(seed * 0x9E3779B97F4A7C15ULL ^ fnv1a(name)) {}

// splitmix64; stable across platforms, unlike the std distributions.
double NamedRng::uniform() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

double NamedRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace hdft
