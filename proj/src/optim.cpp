#include "hdft/optim.hpp"

#include <algorithm>
#include <cmath>

namespace hdft {

void adam_step(ParamStore& params, const ad::GradMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    require_same_shape(params.get(name).shape(), g.shape(), name.c_str());
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, p] : params.entries()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    auto [mit, m_new] = state.m.try_emplace(name, p.shape());
    auto [vit, v_new] = state.v.try_emplace(name, p.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    require_same_shape(m.shape(), p.shape(), name.c_str());
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    round_to_precision(p);
  }
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport grad_check(const LossFn& fn, const ParamStore& params, double tolerance,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = tolerance;

  ad::GradMap analytic;
  {
    PrecisionScope scope(options.analytic_precision);
    ad::Tape tape;
    const auto loss = fn(Binder(params, &tape));
    analytic = ad::backward(tape, loss);
  }

  PrecisionScope f64(Precision::F64);
  auto eval = [&](const ParamStore& p) { return fn(Binder(p, nullptr)).value()[0]; };

  ParamStore probe = params;
  for (const auto& [name, value] : params.entries()) {
    if (name.rfind(options.only_prefix, 0) != 0) continue;
    GradCheckEntry entry;
    entry.name = name;
    const Tensor& a = analytic.at(name);
    std::size_t stride = 1;
    if (options.max_entries_per_param > 0 && value.size() > options.max_entries_per_param) {
      stride = (value.size() + options.max_entries_per_param - 1) / options.max_entries_per_param;
    }
    double max_err = 0.0, scale = 0.0;
    Tensor& slot = probe.get(name);
    for (std::size_t i = 0; i < value.size(); i += stride) {
      const double orig = slot[i];
      const double h = options.step;
      auto at = [&](double offset) {
        slot[i] = orig + offset;
        return eval(probe);
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      slot[i] = orig;
      max_err = std::max(max_err, std::abs(numeric - a[i]));
      scale = std::max({scale, std::abs(numeric), std::abs(a[i])});
      ++entry.checked;
    }
    entry.max_abs_error = max_err;
    entry.grad_scale = scale;
    report.entries.push_back(entry);
  }
  double global = 0.0;
  for (const auto& e : report.entries) global = std::max(global, e.grad_scale);
  for (auto& e : report.entries) {
    e.max_rel_error = e.max_abs_error / std::max({e.grad_scale, kRelativeFloor * global, 1e-12});
  }
  return report;
}

}  // namespace hdft
