#include "hdft/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "hdft/metrics.hpp"

namespace hdft {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (!(adam.lr > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (crop == 0 || crop % (std::size_t{1} << (model.levels - 1)) != 0) {
    throw std::invalid_argument("train config: crop must be a positive multiple of 2^(levels-1)");
  }
  if (log_interval == 0) throw std::invalid_argument("train config: log interval must be positive");
  if (checkpoint_interval > 0 && checkpoint_path.empty()) {
    throw std::invalid_argument("train config: checkpoint interval set without a checkpoint path");
  }
}

TrainState initial_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.params = init_params(cfg.seed, cfg.model);
  s.adam.config = cfg.adam;
  return s;
}

namespace {

Tensor crop_at(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t size) {
  Tensor out({t.dim(0), size, size});
  for (std::size_t c = 0; c < t.dim(0); ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
  return out;
}

Sample crop_sample(const std::vector<Sample>& data, const TrainConfig& cfg, std::uint64_t iter) {
  NamedRng rng(cfg.seed, "train/crop/" + std::to_string(iter));
  const auto& s = data[static_cast<std::size_t>(rng.uniform() * static_cast<double>(data.size())) % data.size()];
  const std::size_t h = s.gt.dim(1), w = s.gt.dim(2);
  if (h < cfg.crop || w < cfg.crop) throw std::invalid_argument("train: image smaller than the crop size");
  const auto y0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(h - cfg.crop + 1));
  const auto x0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(w - cfg.crop + 1));
  Sample out;
  for (const auto& in : s.inputs) out.inputs.push_back(crop_at(in, y0, x0, cfg.crop));
  out.gt = crop_at(s.gt, y0, x0, cfg.crop);
  return out;
}

void check_data(const std::vector<Sample>& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: no training samples");
  for (const auto& s : data) {
    const std::size_t want = cfg.model.with_fusion ? 2 : 1;
    if (s.inputs.size() != want) {
      throw std::invalid_argument("train: samples need " + std::to_string(want) + " input image(s)");
    }
    for (const auto& in : s.inputs) require_same_shape(in.shape(), s.gt.shape(), "train sample");
  }
}

}  // namespace

void train(const std::vector<Sample>& data, const TrainConfig& cfg, TrainState& state, const ProgressFn& progress) {
  cfg.validate();
  check_data(data, cfg);
  state.adam.config = cfg.adam;
  while (state.adam.step < cfg.iterations) {
    const std::uint64_t iter = state.adam.step;
    const auto sample = crop_sample(data, cfg, iter);
    ad::Tape tape;
    Binder b(state.params, &tape);
    const auto out = cfg.model.with_fusion
                         ? forward_mef(b, ad::constant(sample.inputs[0]), ad::constant(sample.inputs[1]), cfg.model)
                         : forward(b, ad::constant(sample.inputs[0]), cfg.model);
    const auto loss = total_loss(out, sample.gt, cfg.loss);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw TrainingError("non-finite loss " + std::to_string(loss_value) + " at iteration " + std::to_string(iter));
    }
    auto grads = ad::backward(tape, loss);
    HistoryRow row{static_cast<std::size_t>(iter), loss_value, psnr(clamp01(out.outputs.front().value()), sample.gt)};
    adam_step(state.params, grads, state.adam);
    if (iter % cfg.log_interval == 0 || state.adam.step == cfg.iterations) {
      state.history.push_back(row);
      if (progress) progress(row);
    }
    if (cfg.checkpoint_interval > 0 && state.adam.step % cfg.checkpoint_interval == 0) {
      save_checkpoint(state, cfg.checkpoint_path);
    }
  }
}

TrainState train(const std::vector<Sample>& data, const TrainConfig& cfg, std::optional<ParamStore> params,
                 const ProgressFn& progress) {
  auto state = initial_state(cfg);
  if (params) state.params = std::move(*params);
  train(data, cfg, state, progress);
  return state;
}

namespace {

const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";
const std::string kAdamStep = "adam.step";
const std::string kHistory = "history";

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  ParamStore all = state.params;
  for (const auto& [name, t] : state.params.entries()) {
    auto mit = state.adam.m.find(name);
    auto vit = state.adam.v.find(name);
    all.add(kAdamM + name, mit != state.adam.m.end() ? mit->second : Tensor(t.shape()));
    all.add(kAdamV + name, vit != state.adam.v.end() ? vit->second : Tensor(t.shape()));
  }
  all.add(kAdamStep, Tensor({1}, static_cast<double>(state.adam.step)));
  Tensor hist({state.history.size(), 3});
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    hist[3 * i] = static_cast<double>(state.history[i].iter);
    hist[3 * i + 1] = state.history[i].loss;
    hist[3 * i + 2] = state.history[i].psnr;
  }
  all.add(kHistory, hist);
  // Write to a sibling file first so an interrupted save leaves the old checkpoint intact.
  auto tmp = path;
  tmp += ".tmp";
  save_params(all, tmp);
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const auto all = load_params(path);
  if (!all.contains(kAdamStep) || !all.contains(kHistory)) throw FormatError("not a training checkpoint: " + path.string());
  TrainState s;
  for (const auto& [name, t] : all.entries()) {
    if (name.rfind(kAdamM, 0) == 0) {
      s.adam.m.emplace(name.substr(kAdamM.size()), t);
    } else if (name.rfind(kAdamV, 0) == 0) {
      s.adam.v.emplace(name.substr(kAdamV.size()), t);
    } else if (name != kAdamStep && name != kHistory) {
      s.params.add(name, t);
    }
  }
  s.adam.step = static_cast<std::uint64_t>(all.get(kAdamStep)[0]);
  const auto& hist = all.get(kHistory);
  for (std::size_t i = 0; i < hist.dim(0); ++i) {
    s.history.push_back({static_cast<std::size_t>(hist[3 * i]), hist[3 * i + 1], hist[3 * i + 2]});
  }
  return s;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "iter,loss,psnr\n" << std::setprecision(6);
  for (const auto& r : history) f << r.iter << ',' << r.loss << ',' << r.psnr << '\n';
}

Tensor synth_clean_image(std::uint64_t seed, std::size_t index, std::size_t size) {
  NamedRng rng(seed, "synth/clean/" + std::to_string(index));
  Tensor img({3, size, size});
  const double n = static_cast<double>(size);
  // Smooth background: per-channel linear ramps plus one low-frequency wave.
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.25, 0.75), gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3);
    const double fx = rng.uniform(0.5, 2.0), fy = rng.uniform(0.5, 2.0), phase = rng.uniform(0.0, 6.28);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double u = static_cast<double>(x) / n, v = static_cast<double>(y) / n;
        img.at(c, y, x) = base + gx * (u - 0.5) + gy * (v - 0.5) +
                          0.1 * std::sin(2.0 * std::numbers::pi * (fx * u + fy * v) + phase);
      }
  }
  // A few flat shapes: discs and axis-aligned rectangles.
  const int shapes = 2 + static_cast<int>(rng.uniform() * 3.0);
  for (int s = 0; s < shapes; ++s) {
    const bool disc = rng.uniform() < 0.5;
    const double cx = rng.uniform(0.1, 0.9) * n, cy = rng.uniform(0.1, 0.9) * n;
    const double rx = rng.uniform(0.08, 0.25) * n, ry = disc ? rx : rng.uniform(0.08, 0.25) * n;
    double color[3];
    for (auto& col : color) col = rng.uniform(0.1, 0.9);
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double dx = (static_cast<double>(x) - cx) / rx, dy = (static_cast<double>(y) - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside)
          for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
  }
  for (auto& v : img.vec()) v = std::clamp(v, 0.02, 0.98);
  return img;
}

Tensor degrade(const Tensor& clean, double gamma, double noise_std, std::uint64_t seed, const std::string& stream) {
  Tensor out = clean;
  NamedRng rng(seed, stream);
  for (auto& v : out.vec()) {
    v = std::pow(v, gamma);
    if (noise_std > 0.0) v += noise_std * rng.normal();
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::vector<Sample> synth_dataset(std::uint64_t seed, std::size_t n, std::size_t size, const SynthConfig& cfg) {
  if (size == 0 || size % 8 != 0) throw std::invalid_argument("synth_dataset: size must be a positive multiple of 8");
  if (cfg.gammas.empty()) throw std::invalid_argument("synth_dataset: no gammas given");
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto clean = synth_clean_image(seed, i, size);
    const double gamma = cfg.gammas[i % cfg.gammas.size()];
    out.push_back({{degrade(clean, gamma, cfg.noise_std, seed, "synth/noise/" + std::to_string(i))}, clean});
  }
  return out;
}

std::vector<Sample> synth_mef_dataset(std::uint64_t seed, std::size_t n, std::size_t size, const SynthConfig& cfg) {
  if (size == 0 || size % 8 != 0) throw std::invalid_argument("synth_mef_dataset: size must be a positive multiple of 8");
  if (cfg.gammas.size() < 2) throw std::invalid_argument("synth_mef_dataset: need two gammas");
  const auto [lo, hi] = std::minmax_element(cfg.gammas.begin(), cfg.gammas.end());
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto clean = synth_clean_image(seed, i, size);
    const auto id = std::to_string(i);
    auto under = degrade(clean, *hi, cfg.noise_std, seed, "synth/under/" + id);
    auto over = degrade(clean, *lo, cfg.noise_std, seed, "synth/over/" + id);
    out.push_back({{under, over}, clean});
  }
  return out;
}

}  // namespace hdft
