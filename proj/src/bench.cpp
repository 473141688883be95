#include "hdft/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "hdft/blocks.hpp"
#include "hdft/ops.hpp"
#include "hdft/params.hpp"

namespace hdft {

namespace {

constexpr double kBytesPerValue = 8.0;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_dims(std::size_t c, std::size_t h, std::size_t w, std::size_t window, const char* what) {
  if (c == 0 || h == 0 || w == 0) throw std::invalid_argument(std::string(what) + ": channels and map size must be positive");
  if (window == 0) throw std::invalid_argument(std::string(what) + ": window must be positive");
}

}  // namespace

double fft_flops(double points) { return points <= 1.0 ? 0.0 : 5.0 * points * std::log2(points); }

FlopCount flops_hdf_block(std::size_t c, std::size_t h, std::size_t w, std::size_t window, std::size_t expansion) {
  check_dims(c, h, w, window, "flops_hdf_block");
  if (expansion == 0) throw std::invalid_argument("flops_hdf_block: expansion must be positive");
  const double n = double(h) * double(w);
  const double cc = double(c);
  const double ce = cc * double(expansion);
  const double d = double(window) * double(window);
  const double windows = double(ceil_div(h, window) * ceil_div(w, window));
  const double padded = windows * d;

  FlopCount f;
  f.conv = 4.0 * 2.0 * n * cc * cc     // wq, wk, wv, wout
           + 2.0 * 2.0 * n * cc * ce;  // expand and reduce
  f.fft = 3.0 * cc * fft_flops(n);     // fft Q, fft K, inverse of the product
  f.window_fft = 2.0 * windows * ce * fft_flops(d);
  f.elementwise = 2.0 * 8.0 * n * cc   // two layer norms
                  + 6.0 * n * cc       // complex product of the spectra
                  + 5.0 * n * cc       // softmax
                  + n * cc             // gating A*V
                  + 6.0 * padded * ce  // spectral mask
                  + 3.0 * n * cc;      // residual additions
  return f;
}

FlopCount flops_window_attention(std::size_t c, std::size_t h, std::size_t w, std::size_t window) {
  check_dims(c, h, w, window, "flops_window_attention");
  if (window > std::min(h, w)) {
    throw std::invalid_argument("flops_window_attention: window " + std::to_string(window) + " exceeds the " +
                                std::to_string(h) + "x" + std::to_string(w) + " map");
  }
  const double n = double(h) * double(w);
  const double cc = double(c);
  const double d = double(window) * double(window);
  const double windows = double(ceil_div(h, window) * ceil_div(w, window));

  FlopCount f;
  f.conv = 4.0 * 2.0 * n * cc * cc      // q, k, v and output projections
           + 2.0 * 2.0 * n * cc * 4.0 * cc;  // 4x MLP
  f.attention = windows * 2.0 * d * d * cc * 2.0;
  f.elementwise = 2.0 * 8.0 * n * cc  // two layer norms
                  + windows * 5.0 * d * d  // softmax over every score
                  + 8.0 * n * 4.0 * cc     // GELU
                  + 2.0 * n * cc;          // residual additions
  return f;
}

double buffer_bytes_hdf_block(std::size_t c, std::size_t h, std::size_t w, std::size_t window,
                              std::size_t expansion) {
  check_dims(c, h, w, window, "buffer_bytes_hdf_block");
  const double n = double(h) * double(w);
  const double padded = double(ceil_div(h, window) * window) * double(ceil_div(w, window) * window);
  const double ce = double(c) * double(expansion);
  // HFA holds Q, K, V, two spectra and their product, then M and A; a spectrum costs two values per entry.
  const double hfa = double(c) * n * (3.0 + 3.0 * 2.0 + 2.0);
  // DFFFN holds the expanded map, its window spectra and the merged result.
  const double ffn = ce * padded * (1.0 + 2.0 + 1.0);
  return kBytesPerValue * (std::max(hfa, ffn) + 2.0 * double(c) * n);
}

double buffer_bytes_window_attention(std::size_t c, std::size_t h, std::size_t w, std::size_t window) {
  check_dims(c, h, w, window, "buffer_bytes_window_attention");
  const double n = double(h) * double(w);
  const double d = double(window) * double(window);
  const double windows = double(ceil_div(h, window) * ceil_div(w, window));
  // Batched scores for every window, plus Q, K, V and the output map.
  return kBytesPerValue * (windows * d * d + 4.0 * double(c) * n);
}

std::string mechanism_name(Mechanism m) { return m == Mechanism::HdfBlock ? "hdf_block" : "window_attention"; }

Mechanism parse_mechanism(const std::string& s) {
  if (s == "hdf_block" || s == "hdf") return Mechanism::HdfBlock;
  if (s == "window_attention" || s == "swin") return Mechanism::WindowAttention;
  throw std::invalid_argument("unknown mechanism '" + s + "'");
}

void BenchConfig::validate() const {
  if (mechanisms.empty() || windows.empty() || maps.empty()) throw std::invalid_argument("bench: empty grid");
  if (channels == 0) throw std::invalid_argument("bench: channels must be positive");
  if (repeats < 5) throw std::invalid_argument("bench: at least 5 timed repeats are required");
  for (auto w : windows) {
    if (w == 0) throw std::invalid_argument("bench: window must be positive");
  }
  for (auto m : maps) {
    if (m == 0) throw std::invalid_argument("bench: map size must be positive");
    for (auto w : windows) {
      if (w > m) {
        throw std::invalid_argument("bench: window " + std::to_string(w) + " exceeds map " + std::to_string(m));
      }
    }
  }
  if (!(memory_budget > 0.0)) throw std::invalid_argument("bench: memory budget must be positive");
}

namespace {

Tensor random_tensor(std::uint64_t seed, const std::string& name, Shape shape, double scale) {
  NamedRng rng(seed, name);
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(-scale, scale);
  return t;
}

Tensor layer_norm_channels(const Tensor& x) {
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < c; ++k) mean += x[k * n + i];
    mean /= double(c);
    for (std::size_t k = 0; k < c; ++k) var += (x[k * n + i] - mean) * (x[k * n + i] - mean);
    const double inv = 1.0 / std::sqrt(var / double(c) + 1e-5);
    for (std::size_t k = 0; k < c; ++k) y[k * n + i] = (x[k * n + i] - mean) * inv;
  }
  return y;
}

void add_into(Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Channel-last copy of one window: out[p*C + c].
void gather(const Tensor& windows, std::size_t idx, std::size_t c, std::size_t d, std::vector<double>& out) {
  const double* src = windows.vec().data() + idx * c * d;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t p = 0; p < d; ++p) out[p * c + k] = src[k * d + p];
  }
}

}  // namespace

Tensor window_attention_forward(const Tensor& x, std::size_t window, std::uint64_t seed) {
  require_rank(x.shape(), 3, "window_attention_forward");
  const std::size_t c = x.dim(0);
  if (window == 0 || window > std::min(x.dim(1), x.dim(2))) {
    throw std::invalid_argument("window_attention_forward: window must be in [1, min(H, W)]");
  }
  const double s = 1.0 / std::sqrt(double(c));
  const auto wqkv = random_tensor(seed, "bench/wa/qkv", {3 * c, c, 1, 1}, s);
  const auto wout = random_tensor(seed, "bench/wa/out", {c, c, 1, 1}, s);
  const auto w1 = random_tensor(seed, "bench/wa/mlp1", {4 * c, c, 1, 1}, s);
  const auto w2 = random_tensor(seed, "bench/wa/mlp2", {c, 4 * c, 1, 1}, 0.5 * s);

  const auto qkv = conv2d(layer_norm_channels(x), wqkv);
  const std::size_t n = x.dim(1) * x.dim(2);
  auto part = [&](std::size_t k) {
    Tensor t({c, x.dim(1), x.dim(2)}, std::vector<double>(qkv.vec().begin() + k * c * n,
                                                          qkv.vec().begin() + (k + 1) * c * n));
    return window_partition(t, window, window);
  };
  const auto q = part(0), k = part(1), v = part(2);
  const std::size_t d = window * window;
  Tensor attended(q.windows.shape());
  std::vector<double> qt(d * c), kt(d * c), vt(d * c), row(d), acc(c);
  for (std::size_t wi = 0; wi < q.num_windows(); ++wi) {
    gather(q.windows, wi, c, d, qt);
    gather(k.windows, wi, c, d, kt);
    gather(v.windows, wi, c, d, vt);
    double* dst = attended.vec().data() + wi * c * d;
    for (std::size_t i = 0; i < d; ++i) {
      double mx = -INFINITY;
      for (std::size_t j = 0; j < d; ++j) {
        double dot = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) dot += qt[i * c + ch] * kt[j * c + ch];
        row[j] = dot * s;
        mx = std::max(mx, row[j]);
      }
      double sum = 0.0;
      for (auto& r : row) sum += (r = std::exp(r - mx));
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double a = row[j] / sum;
        for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += a * vt[j * c + ch];
      }
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch * d + i] = acc[ch];
    }
  }
  auto h = conv2d(window_merge(attended, q), wout);
  add_into(h, x);
  auto hidden = conv2d(layer_norm_channels(h), w1);
  for (auto& e : hidden.vec()) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
  auto out = conv2d(hidden, w2);
  add_into(out, h);
  return out;
}

namespace {

struct Timing {
  double mean_ms = 0.0, std_ms = 0.0;
};

template <typename F>
Timing time_runs(F&& run, std::size_t warmup, std::size_t repeats) {
  for (std::size_t i = 0; i < warmup; ++i) run();
  std::vector<double> ms;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  Timing t;
  for (double v : ms) t.mean_ms += v;
  t.mean_ms /= double(ms.size());
  for (double v : ms) t.std_ms += (v - t.mean_ms) * (v - t.mean_ms);
  t.std_ms = std::sqrt(t.std_ms / double(ms.size() - 1));
  return t;
}

}  // namespace

CostReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  CostReport report;
  for (auto map : cfg.maps) {
    const auto x = random_tensor(cfg.seed, "bench/input/" + std::to_string(map), {cfg.channels, map, map}, 1.0);
    for (auto mech : cfg.mechanisms) {
      for (auto window : cfg.windows) {
        CostRow row;
        row.mechanism = mech;
        row.window = window;
        row.map = map;
        row.channels = cfg.channels;
        if (mech == Mechanism::HdfBlock) {
          row.flops = flops_hdf_block(cfg.channels, map, map, window).total();
          row.buffer_bytes = buffer_bytes_hdf_block(cfg.channels, map, map, window);
        } else {
          row.flops = flops_window_attention(cfg.channels, map, map, window).total();
          row.buffer_bytes = buffer_bytes_window_attention(cfg.channels, map, map, window);
        }
        row.out_of_memory = row.buffer_bytes > cfg.memory_budget;
        if (!row.out_of_memory) {
          Timing t;
          if (mech == Mechanism::HdfBlock) {
            BlockOptions opt;
            opt.window = window;
            ParamStore p;
            init_hdf_block(p, "blk", cfg.channels, opt, cfg.seed);
            t = time_runs([&] { (void)hdf_block(p, "blk", x, opt); }, cfg.warmup, cfg.repeats);
          } else {
            t = time_runs([&] { (void)window_attention_forward(x, window, cfg.seed); }, cfg.warmup, cfg.repeats);
          }
          row.mean_ms = t.mean_ms;
          row.std_ms = t.std_ms;
          row.repeats = cfg.repeats;
        }
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

std::string report_csv(const CostReport& report) {
  std::ostringstream os;
  os << "# " << report.note << "\n";
  os << "mechanism,window,map,channels,flops,mean_ms,std_ms,repeats,buffer_bytes,status\n";
  os << std::setprecision(6);
  for (const auto& r : report.rows) {
    os << mechanism_name(r.mechanism) << ',' << r.window << ',' << r.map << ',' << r.channels << ',' << r.flops
       << ',';
    if (r.out_of_memory) {
      os << ",,0,";
    } else {
      os << r.mean_ms << ',' << r.std_ms << ',' << r.repeats << ',';
    }
    os << r.buffer_bytes << ',' << (r.out_of_memory ? "out_of_memory" : "ok") << '\n';
  }
  return os.str();
}

void write_report_csv(const CostReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << report_csv(report);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace hdft
