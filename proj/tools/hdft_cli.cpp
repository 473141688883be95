#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdft/bench.hpp"
#include "hdft/config.hpp"
#include "hdft/image_io.hpp"
#include "hdft/metrics.hpp"
#include "hdft/pipeline.hpp"
#include "hdft/pyramid.hpp"
#include "hdft/selfcheck.hpp"
#include "hdft/training.hpp"

namespace fs = std::filesystem;
using namespace hdft;

namespace {

// Usage problems discovered after CLI11 has accepted the flags.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_kv(const std::string& key, const std::string& value) { std::cout << key << '=' << value << '\n'; }

// ---------------------------------------------------------------------------
// enhance / fuse

struct EnhanceArgs {
  std::string weights, in, out;
};

void run_enhance(const EnhanceArgs& a) {
  const auto params = load_params(a.weights);
  const auto cfg = infer_config(params);
  const auto img = load_image(a.in);
  save_image(forward(params, img, cfg).final, a.out);
}

struct FuseArgs {
  std::string weights, under, over, out;
};

void run_fuse(const FuseArgs& a) {
  const auto params = load_params(a.weights);
  const auto cfg = infer_config(params);
  if (!cfg.with_fusion) throw std::runtime_error(a.weights + " has no fusion block; train with model.fusion = true");
  save_image(forward_mef(params, load_image(a.under), load_image(a.over), cfg).final, a.out);
}

// ---------------------------------------------------------------------------
// decompose / reconstruct

constexpr double kResidualOffset = 0.5;

struct DecomposeArgs {
  std::string in, out_dir, format = "ppm";
  std::size_t levels = 4;
};

fs::path level_path(const fs::path& dir, std::size_t level, const std::string& ext) {
  return dir / ("level" + std::to_string(level) + "." + ext);
}

void run_decompose(const DecomposeArgs& a) {
  if (a.format != "ppm" && a.format != "png") throw UsageError("--format must be ppm or png");
  if (a.levels < 2) throw UsageError("--levels must be at least 2");
  const auto pyr = decompose(load_image(a.in), a.levels);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 1; i <= a.levels; ++i) {
    const bool base = i == a.levels;
    Tensor img = base ? pyr.base : pyr.residuals[i - 1];
    if (!base) {
      for (auto& v : img.vec()) v += kResidualOffset;
    }
    std::vector<std::string> meta = {"hdft-pyramid level=" + std::to_string(i) + " levels=" + std::to_string(a.levels),
                                     std::string("kind=") + (base ? "base" : "residual"),
                                     "offset=" + fmt(base ? 0.0 : kResidualOffset)};
    save_image(img, level_path(a.out_dir, i, a.format), meta);
  }
}

struct LevelMeta {
  std::size_t level = 0, levels = 0;
  std::string kind;
  double offset = 0.0;
};

LevelMeta parse_meta(const std::vector<std::string>& comments, const fs::path& path) {
  LevelMeta m;
  for (const auto& c : comments) {
    std::istringstream is(c);
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (key == "level") m.level = std::stoul(value);
      if (key == "levels") m.levels = std::stoul(value);
      if (key == "kind") m.kind = value;
      if (key == "offset") m.offset = std::stod(value);
    }
  }
  if (m.level == 0 || m.levels == 0 || m.kind.empty()) {
    throw std::runtime_error(path.string() + ": missing pyramid metadata");
  }
  return m;
}

struct ReconstructArgs {
  std::string in_dir, out;
};

void run_reconstruct(const ReconstructArgs& a) {
  const std::string ext = fs::exists(level_path(a.in_dir, 1, "ppm")) ? "ppm" : "png";
  Pyramid pyr;
  std::size_t levels = 0;
  for (std::size_t i = 1; levels == 0 || i <= levels; ++i) {
    const auto path = level_path(a.in_dir, i, ext);
    if (!fs::exists(path)) throw std::runtime_error("missing pyramid level " + path.string());
    std::vector<std::string> comments;
    auto img = load_image(path, &comments);
    const auto meta = parse_meta(comments, path);
    if (meta.level != i || (levels != 0 && meta.levels != levels)) {
      throw std::runtime_error(path.string() + ": inconsistent pyramid metadata");
    }
    levels = meta.levels;
    for (auto& v : img.vec()) v -= meta.offset;
    if (meta.kind == "base") {
      if (i != levels) throw std::runtime_error(path.string() + ": base must be the last level");
      pyr.base = std::move(img);
    } else {
      pyr.residuals.push_back(std::move(img));
    }
  }
  save_image(reconstruct(pyr), a.out);
}

// ---------------------------------------------------------------------------
// train

const std::set<std::string> kTrainKeys = {
    "model.levels",         "model.width",          "model.scales",        "model.blocks_per_scale",
    "model.window",         "model.expansion",      "model.kinds",         "model.fusion",
    "model.scaled_attention", "model.channel_softmax", "model.dfffn_residual", "train.lr",
    "train.lambda1",        "train.lambda2",        "train.recon",         "train.iterations",
    "train.crop",           "train.checkpoint",     "train.checkpoint_interval", "train.log_interval",
    "data.kind",            "data.count",           "data.size",           "data.gammas",
    "data.noise",           "data.inputs",          "data.under",          "data.over",
    "data.targets"};

std::vector<double> to_doubles(const std::vector<std::string>& items, const std::string& key) {
  std::vector<double> out;
  for (const auto& s : items) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected numbers, got '" + s + "'");
    }
  }
  return out;
}

TrainConfig train_config_from(const Config& c, std::uint64_t seed) {
  TrainConfig t;
  auto& m = t.model;
  m.levels = c.get_uint("model.levels", m.levels);
  m.width = c.get_uint("model.width", m.width);
  m.scales = c.get_uint("model.scales", m.scales);
  m.blocks_per_scale = c.get_uint("model.blocks_per_scale", m.blocks_per_scale);
  m.block.window = c.get_uint("model.window", m.block.window);
  m.block.ffn_expansion = c.get_uint("model.expansion", m.block.ffn_expansion);
  m.block.scaled_attention = c.get_bool("model.scaled_attention", m.block.scaled_attention);
  m.block.channel_softmax = c.get_bool("model.channel_softmax", m.block.channel_softmax);
  m.block.dfffn_residual = c.get_bool("model.dfffn_residual", m.block.dfffn_residual);
  m.with_fusion = c.get_bool("model.fusion", m.with_fusion);
  for (const auto& k : c.get_list("model.kinds")) {
    if (k == "hdf") {
      m.kinds.push_back(RestorerKind::Hdf);
    } else if (k == "unet") {
      m.kinds.push_back(RestorerKind::Unet);
    } else {
      throw ConfigError("model.kinds: expected hdf or unet, got '" + k + "'");
    }
  }
  t.adam.lr = c.get_double("train.lr", t.adam.lr);
  t.loss.lambda1 = c.get_double("train.lambda1", t.loss.lambda1);
  t.loss.lambda2 = c.get_double("train.lambda2", t.loss.lambda2);
  const auto recon = c.get_string("train.recon", "l1");
  if (recon != "l1" && recon != "l2") throw ConfigError("train.recon: expected l1 or l2");
  t.loss.recon = recon == "l1" ? ReconKind::L1 : ReconKind::L2;
  t.iterations = c.get_uint("train.iterations", t.iterations);
  t.crop = c.get_uint("train.crop", t.crop);
  t.checkpoint_interval = c.get_uint("train.checkpoint_interval", 0);
  t.checkpoint_path = c.get_string("train.checkpoint", "");
  t.log_interval = c.get_uint("train.log_interval", t.log_interval);
  t.seed = seed;
  return t;
}

std::vector<Sample> dataset_from(const Config& c, std::uint64_t seed, bool mef) {
  const auto kind = c.get_string("data.kind", mef ? "synth_mef" : "synth");
  if (kind == "synth" || kind == "synth_mef") {
    if ((kind == "synth_mef") != mef) throw ConfigError("data.kind " + kind + " does not match model.fusion");
    SynthConfig s;
    if (c.has("data.gammas")) s.gammas = to_doubles(c.get_list("data.gammas"), "data.gammas");
    s.noise_std = c.get_double("data.noise", s.noise_std);
    const auto n = c.get_uint("data.count", 1);
    const auto size = c.get_uint("data.size", 64);
    return mef ? synth_mef_dataset(seed, n, size, s) : synth_dataset(seed, n, size, s);
  }
  if (kind != "files") throw ConfigError("data.kind: expected synth, synth_mef or files");
  const auto targets = c.get_list("data.targets");
  std::vector<std::vector<std::string>> inputs;
  if (mef) {
    inputs = {c.get_list("data.under"), c.get_list("data.over")};
  } else {
    inputs = {c.get_list("data.inputs")};
  }
  std::vector<Sample> data;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Sample s;
    for (const auto& list : inputs) {
      if (list.size() != targets.size()) throw ConfigError("data: input and target lists differ in length");
      s.inputs.push_back(load_image(list[i]));
    }
    s.gt = load_image(targets[i]);
    data.push_back(std::move(s));
  }
  if (data.empty()) throw ConfigError("data.targets: no training images listed");
  return data;
}

struct TrainArgs {
  std::string config, out, history;
  bool resume = false;
  bool quiet = false;
};

void run_train(const TrainArgs& a, std::uint64_t seed) {
  const auto conf = Config::load(a.config, kTrainKeys);
  const auto cfg = train_config_from(conf, seed);
  cfg.validate();
  const auto data = dataset_from(conf, seed, cfg.model.with_fusion);

  TrainState state;
  if (a.resume) {
    if (cfg.checkpoint_path.empty()) throw UsageError("--resume needs train.checkpoint in the config");
    state = fs::exists(cfg.checkpoint_path) ? load_checkpoint(cfg.checkpoint_path) : initial_state(cfg);
  } else {
    state = initial_state(cfg);
  }
  train(data, cfg, state, [&](const HistoryRow& r) {
    if (!a.quiet) std::cerr << "iter " << r.iter << " loss " << fmt(r.loss) << " psnr " << fmt(r.psnr) << '\n';
  });
  save_params(state.params, a.out);
  const fs::path history = a.history.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.history);
  write_history_csv(state.history, history);
  if (!state.history.empty()) {
    print_kv("final_loss", fmt(state.history.back().loss));
    print_kv("final_psnr", fmt(state.history.back().psnr));
  }
  print_kv("iterations", std::to_string(state.adam.step));
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsArgs {
  std::string ref, test, ssim_mode = "windowed", mef_mean = "pixel", mef_aggregate = "sum";
  std::vector<std::string> sources;
  double beta = 1.0;
};

void run_metrics(const MetricsArgs& a) {
  const auto ref = load_image(a.ref);
  const auto test = load_image(a.test);
  const auto mode = a.ssim_mode == "global" ? SsimMode::Global : SsimMode::Windowed;
  print_kv("psnr", fmt(psnr(test, ref)));
  print_kv("ssim", fmt(ssim(test, ref, mode)));
  if (!a.sources.empty()) {
    std::vector<Tensor> sources;
    for (const auto& s : a.sources) sources.push_back(load_image(s));
    MefSsimConfig mc;
    mc.beta = a.beta;
    mc.mean = a.mef_mean == "pixel" ? MefMean::PerPixelAcrossSources : MefMean::PerSourceGlobal;
    mc.aggregate = a.mef_aggregate == "sum" ? MefAggregate::Sum : MefAggregate::Mean;
    print_kv("mef_ssim", fmt(mef_ssim(test, sources, mc)));
    print_kv("mef_beta", fmt(a.beta));
  }
}

// ---------------------------------------------------------------------------
// bench

const std::set<std::string> kGridKeys = {"mechanisms", "windows", "maps", "channels",
                                         "repeats",    "warmup",  "budget_mb"};

std::vector<std::size_t> to_sizes(const std::vector<std::string>& items, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& d : to_doubles(items, key)) {
    if (d < 1 || d != std::floor(d)) throw ConfigError(key + ": expected positive integers");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

BenchConfig bench_config_from(const std::string& grid, std::uint64_t seed) {
  std::string text = grid;
  for (auto& ch : text) {
    if (ch == ';') ch = '\n';
  }
  const auto c = Config::parse(text, kGridKeys);
  BenchConfig b;
  if (c.has("mechanisms")) {
    b.mechanisms.clear();
    for (const auto& m : c.get_list("mechanisms")) b.mechanisms.push_back(parse_mechanism(m));
  }
  if (c.has("windows")) b.windows = to_sizes(c.get_list("windows"), "windows");
  if (c.has("maps")) b.maps = to_sizes(c.get_list("maps"), "maps");
  b.channels = c.get_uint("channels", b.channels);
  b.repeats = c.get_uint("repeats", b.repeats);
  b.warmup = c.get_uint("warmup", b.warmup);
  b.memory_budget = c.get_double("budget_mb", b.memory_budget / (1024.0 * 1024.0)) * 1024.0 * 1024.0;
  b.seed = seed;
  return b;
}

struct BenchArgs {
  std::string grid, out;
};

void run_bench_cmd(const BenchArgs& a, std::uint64_t seed) {
  BenchConfig cfg;
  try {
    cfg = bench_config_from(a.grid, seed);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  } catch (const ConfigError& e) {
    throw UsageError(std::string("--grid: ") + e.what());
  }
  const auto report = run_bench(cfg);
  if (a.out.empty()) {
    std::cout << report_csv(report);
  } else {
    write_report_csv(report, a.out);
    print_kv("rows", std::to_string(report.rows.size()));
  }
}

// ---------------------------------------------------------------------------
// grad-check

struct GradArgs {
  std::string block = "all", precision = "both";
};

bool run_grad_check(const GradArgs& a, std::uint64_t seed) {
  std::vector<std::string> blocks;
  if (a.block == "all") {
    blocks = gradient_suite_blocks();
  } else {
    blocks = {a.block};
  }
  std::vector<Precision> precisions;
  if (a.precision != "f32") precisions.push_back(Precision::F64);
  if (a.precision != "f64") precisions.push_back(Precision::F32);
  bool ok = true;
  for (const auto& b : blocks) {
    for (auto p : precisions) {
      const auto r = check_block_gradients(b, p, seed);
      ok = ok && r.passed();
      std::cout << "block=" << b << " precision=" << (p == Precision::F32 ? "f32" : "f64")
                << " worst=" << fmt(r.worst()) << " tolerance=" << fmt(r.tolerance)
                << " status=" << (r.passed() ? "pass" : "fail") << '\n';
    }
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-domain image restoration and exposure fusion"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  EnhanceArgs enhance;
  auto* enh = app.add_subcommand("enhance", "Restore one image with trained weights");
  enh->add_option("--weights", enhance.weights, "Weight file")->required()->check(CLI::ExistingFile);
  enh->add_option("--in", enhance.in, "Input image (.ppm or .png)")->required()->check(CLI::ExistingFile);
  enh->add_option("--out", enhance.out, "Output image")->required();

  FuseArgs fuse;
  auto* fu = app.add_subcommand("fuse", "Fuse an under- and an over-exposed image");
  fu->add_option("--weights", fuse.weights, "Weight file with a fusion block")->required()->check(CLI::ExistingFile);
  fu->add_option("--under", fuse.under, "Under-exposed image")->required()->check(CLI::ExistingFile);
  fu->add_option("--over", fuse.over, "Over-exposed image")->required()->check(CLI::ExistingFile);
  fu->add_option("--out", fuse.out, "Output image")->required();

  DecomposeArgs dec;
  auto* de = app.add_subcommand("decompose", "Write the Laplacian pyramid of an image, one file per level");
  de->add_option("--in", dec.in, "Input image")->required()->check(CLI::ExistingFile);
  de->add_option("--levels", dec.levels, "Number of levels")->capture_default_str();
  de->add_option("--out-dir", dec.out_dir, "Output directory")->required();
  de->add_option("--format", dec.format, "ppm or png")->capture_default_str();

  ReconstructArgs rec;
  auto* re = app.add_subcommand("reconstruct", "Rebuild an image from a decompose directory");
  re->add_option("--in-dir", rec.in_dir, "Directory written by decompose")->required()->check(CLI::ExistingDirectory);
  re->add_option("--out", rec.out, "Output image")->required();

  TrainArgs tr;
  auto* tra = app.add_subcommand("train", "Train a model from a config file");
  tra->add_option("--config", tr.config, "key = value config file")->required()->check(CLI::ExistingFile);
  tra->add_option("--out", tr.out, "Output weight file")->required();
  tra->add_option("--history", tr.history, "Loss history CSV (default: --out with a .csv extension)");
  tra->add_flag("--resume", tr.resume, "Continue from train.checkpoint when it exists");
  tra->add_flag("--quiet", tr.quiet, "Do not print per-iteration progress");

  MetricsArgs met;
  auto* me = app.add_subcommand("metrics", "Image quality metrics as key=value lines");
  me->add_option("--ref", met.ref, "Reference image")->required()->check(CLI::ExistingFile);
  me->add_option("--test", met.test, "Image under test")->required()->check(CLI::ExistingFile);
  me->add_option("--sources", met.sources, "Exposure stack for MEF-SSIM")->check(CLI::ExistingFile);
  me->add_option("--beta", met.beta, "MEF weight sharpness")->capture_default_str()->check(CLI::PositiveNumber);
  me->add_option("--ssim-mode", met.ssim_mode, "windowed or global")
      ->capture_default_str()
      ->check(CLI::IsMember({"windowed", "global"}));
  me->add_option("--mef-mean", met.mef_mean, "pixel or source")
      ->capture_default_str()
      ->check(CLI::IsMember({"pixel", "source"}));
  me->add_option("--mef-aggregate", met.mef_aggregate, "sum or mean")
      ->capture_default_str()
      ->check(CLI::IsMember({"sum", "mean"}));

  BenchArgs ben;
  auto* be = app.add_subcommand("bench", "Analytic FLOPs and wall-clock timing");
  be->add_option("--grid", ben.grid,
                 "Semicolon separated key=value list, e.g. "
                 "\"mechanisms=hdf_block,window_attention;windows=8,32;maps=256;channels=8\"");
  be->add_option("--out", ben.out, "CSV report path (default: stdout)");

  GradArgs gra;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks at toy sizes");
  std::vector<std::string> names = gradient_suite_blocks();
  names.push_back("all");
  gc->add_option("--block", gra.block, "Component to check")->capture_default_str()->check(CLI::IsMember(names));
  gc->add_option("--precision", gra.precision, "f32, f64 or both")
      ->capture_default_str()
      ->check(CLI::IsMember({"f32", "f64", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*enh) run_enhance(enhance);
    if (*fu) run_fuse(fuse);
    if (*de) run_decompose(dec);
    if (*re) run_reconstruct(rec);
    if (*tra) run_train(tr, seed);
    if (*me) run_metrics(met);
    if (*be) run_bench_cmd(ben, seed);
    if (*gc && !run_grad_check(gra, seed)) {
      std::cerr << "error: gradient check failed\n";
      return 2;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
