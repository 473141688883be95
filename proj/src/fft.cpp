#include "hdft/fft.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>

namespace hdft {

namespace {

std::vector<std::size_t> prime_factors(std::size_t n) {
  std::vector<std::size_t> f;
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  }
  if (n > 1) f.push_back(n);
  return f;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

class Plan;
std::shared_ptr<const Plan> get_plan(std::size_t n);

class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    auto factors = prime_factors(n);
    bluestein_ = !factors.empty() && factors.back() > kMaxDirectRadix;
    if (!bluestein_) {
      factors_ = std::move(factors);
      twiddles_.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
        twiddles_[j] = std::polar(1.0, angle);
      }
      return;
    }
    m_ = next_pow2(2 * n - 1);
    inner_ = get_plan(m_);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small.
      const std::size_t k2 = (k * k) % (2 * n);
      chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
    }
    kernel_spectrum_.assign(m_, Complex{});
    kernel_spectrum_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_spectrum_[k] = std::conj(chirp_[k]);
      kernel_spectrum_[m_ - k] = std::conj(chirp_[k]);
    }
    inner_->forward(kernel_spectrum_.data());
  }

  void forward(Complex* data) const {
    if (n_ == 1) return;
    if (bluestein_) {
      forward_bluestein(data);
      return;
    }
    thread_local std::vector<Complex> scratch;
    scratch.assign(data, data + n_);
    recurse(scratch.data(), 1, data, n_, 0, 1);
  }

 private:
  // Decimation in time: split into p interleaved subsequences, transform each
  // into contiguous blocks of out, then combine in place column by column.
  void recurse(const Complex* in, std::size_t stride, Complex* out, std::size_t n, std::size_t fi,
               std::size_t tw_step) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = factors_[fi];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) {
      recurse(in + r * stride, stride * p, out + r * m, m, fi + 1, tw_step * p);
    }
    if (p == 2) {
      for (std::size_t k = 0; k < m; ++k) {
        const Complex a = out[k];
        const Complex b = out[k + m] * twiddles_[k * tw_step];
        out[k] = a + b;
        out[k + m] = a - b;
      }
      return;
    }
    const std::size_t root_step = n_ / p;
    std::array<Complex, kMaxDirectRadix> t{};
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t r = 0; r < p; ++r) t[r] = out[r * m + k] * twiddles_[r * k * tw_step];
      for (std::size_t q = 0; q < p; ++q) {
        Complex s = t[0];
        for (std::size_t r = 1; r < p; ++r) s += t[r] * twiddles_[((r * q) % p) * root_step];
        out[q * m + k] = s;
      }
    }
  }

  void forward_bluestein(Complex* data) const {
    thread_local std::vector<Complex> work;
    work.assign(m_, Complex{});
    for (std::size_t k = 0; k < n_; ++k) work[k] = data[k] * chirp_[k];
    inner_->forward(work.data());
    for (std::size_t k = 0; k < m_; ++k) work[k] *= kernel_spectrum_[k];
    // Inverse of the inner transform via conjugation.
    for (auto& v : work) v = std::conj(v);
    inner_->forward(work.data());
    const double scale = 1.0 / static_cast<double>(m_);
    for (std::size_t k = 0; k < n_; ++k) data[k] = std::conj(work[k]) * scale * chirp_[k];
  }

  std::size_t n_;
  bool bluestein_ = false;
  std::vector<std::size_t> factors_;
  std::vector<Complex> twiddles_;
  std::size_t m_ = 0;
  std::shared_ptr<const Plan> inner_;
  std::vector<Complex> chirp_;
  std::vector<Complex> kernel_spectrum_;
};

std::shared_ptr<const Plan> get_plan(std::size_t n) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, std::shared_ptr<const Plan>> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  // Built outside the lock: a Bluestein plan recursively requests its inner plan.
  auto plan = std::make_shared<const Plan>(n);
  std::lock_guard lock(mu);
  return cache.emplace(n, std::move(plan)).first->second;
}

void transform_last2(ComplexTensor& x, bool inverse) {
  if (x.rank() < 2) throw ShapeError("fft2 needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t h = x.dim(x.rank() - 2);
  const std::size_t w = x.dim(x.rank() - 1);
  const std::size_t batch = x.size() / (h * w);
  auto row_plan = get_plan(w);
  auto col_plan = get_plan(h);
  auto data = x.data();
  std::vector<Complex> column(h);
  for (std::size_t b = 0; b < batch; ++b) {
    Complex* plane = data.data() + b * h * w;
    if (inverse) {
      for (std::size_t i = 0; i < h * w; ++i) plane[i] = std::conj(plane[i]);
    }
    for (std::size_t r = 0; r < h; ++r) row_plan->forward(plane + r * w);
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t r = 0; r < h; ++r) column[r] = plane[r * w + c];
      col_plan->forward(column.data());
      for (std::size_t r = 0; r < h; ++r) plane[r * w + c] = column[r];
    }
    if (inverse) {
      const double scale = 1.0 / static_cast<double>(h * w);
      for (std::size_t i = 0; i < h * w; ++i) plane[i] = std::conj(plane[i]) * scale;
    }
  }
  round_to_precision(x);
}

}  // namespace

void fft1d(std::span<Complex> data) {
  if (data.empty()) return;
  get_plan(data.size())->forward(data.data());
}

void ifft1d(std::span<Complex> data) {
  if (data.empty()) return;
  for (auto& v : data) v = std::conj(v);
  get_plan(data.size())->forward(data.data());
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v = std::conj(v) * scale;
}

ComplexTensor fft2(const ComplexTensor& x) {
  ComplexTensor out = x;
  transform_last2(out, false);
  return out;
}

ComplexTensor fft2(const Tensor& x) { return fft2(to_complex(x)); }

ComplexTensor ifft2(const ComplexTensor& x) {
  ComplexTensor out = x;
  transform_last2(out, true);
  return out;
}

ComplexTensor complex_hadamard(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a.shape(), b.shape(), "complex_hadamard");
  ComplexTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  round_to_precision(out);
  return out;
}

}  // namespace hdft
