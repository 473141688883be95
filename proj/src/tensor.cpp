#include "hdft/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace hdft {

namespace {
std::atomic<Precision> g_precision{Precision::F64};
}

void set_precision(Precision p) { g_precision.store(p); }
Precision precision() { return g_precision.load(); }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void validate_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_str(shape));
  }
}

void round_to_precision(Tensor& t) {
  if (precision() != Precision::F32) return;
  for (auto& v : t.vec()) v = static_cast<double>(static_cast<float>(v));
}

void round_to_precision(ComplexTensor& t) {
  if (precision() != Precision::F32) return;
  for (auto& v : t.vec()) {
    v = Complex(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(s));
  }
}

namespace {
template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, F f) {
  require_same_shape(a.shape(), b.shape(), what);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  round_to_precision(out);
  return out;
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor operator-(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor operator*(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor operator*(Scalar s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  round_to_precision(out);
  return out;
}
Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  round_to_precision(a);
  return a;
}

double max_abs(const Tensor& t) {
  double m = 0;
  for (auto v : t.vec()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum(const Tensor& t) {
  double s = 0;
  for (auto v : t.vec()) s += v;
  return s;
}

ComplexTensor to_complex(const Tensor& t) {
  ComplexTensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = Complex(t[i], 0.0);
  return out;
}

Tensor real_part(const ComplexTensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i].real();
  return out;
}

Tensor imag_part(const ComplexTensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i].imag();
  return out;
}

}  // namespace hdft
