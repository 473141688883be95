#include "hdft/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "hdft/pyramid.hpp"

namespace hdft {

RestorerKind ModelConfig::kind(std::size_t stage) const {
  if (!kinds.empty()) return kinds.at(stage - 1);
  return stage == 1 ? RestorerKind::Unet : RestorerKind::Hdf;
}

RestorerConfig ModelConfig::stage_config(std::size_t stage) const {
  RestorerConfig rc;
  rc.kind = kind(stage);
  rc.width = width;
  rc.scales = scales;
  rc.blocks_per_scale = blocks_per_scale;
  rc.block = block;
  return rc;
}

void ModelConfig::validate() const {
  if (levels < 2) throw std::invalid_argument("model config: at least 2 pyramid levels required");
  if (!kinds.empty() && kinds.size() != levels) {
    throw std::invalid_argument("model config: per-stage kinds must list exactly one entry per level");
  }
  stage_config(1).validate();
  if (with_fusion && (fusion.width1 == 0 || fusion.width2 == 0)) {
    throw std::invalid_argument("model config: fusion widths must be positive");
  }
}

std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage); }

ParamStore init_params(std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  ParamStore p;
  if (cfg.with_fusion) init_fusion(p, kFusionPrefix, cfg.fusion, seed);
  for (std::size_t k = 1; k <= cfg.levels; ++k) init_restorer(p, stage_prefix(k), cfg.stage_config(k), seed);
  return p;
}

void check_forward_input(const Shape& shape, const ModelConfig& cfg) {
  require_rank(shape, 3, "pipeline input");
  if (shape[0] != 3) throw ShapeError("pipeline: expected an RGB image, got " + shape_str(shape));
  check_pyramid_input(shape, cfg.levels);
}

namespace {

// Levels smaller than the restorer's minimum are padded up and cropped back.
ad::Var restore_level(const Binder& b, std::size_t stage, const ad::Var& x, const ModelConfig& cfg) {
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t ph = std::max(h, kMinRestorerSide), pw = std::max(w, kMinRestorerSide);
  const auto rc = cfg.stage_config(stage);
  if (ph == h && pw == w) return restorer_forward(b, stage_prefix(stage), x, rc);
  return ad::crop(restorer_forward(b, stage_prefix(stage), ad::pad_replicate(x, ph, pw), rc), h, w);
}

}  // namespace

VarPipelineOutput forward(const Binder& b, const ad::Var& x, const ModelConfig& cfg) {
  check_forward_input(x.shape(), cfg);
  const auto pyr = decompose(x, cfg.levels);
  const std::size_t n = cfg.levels;
  VarPipelineOutput out;
  out.outputs.resize(n);
  out.outputs[n - 1] = restore_level(b, n, pyr.base, cfg);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const auto& r = pyr.residuals[i - 1];
    auto candidate = ad::add(pyr_up(out.outputs[i], r.dim(1), r.dim(2)), r);
    out.outputs[i - 1] = restore_level(b, i, candidate, cfg);
  }
  return out;
}

VarPipelineOutput forward_mef(const Binder& b, const ad::Var& i1, const ad::Var& i2, const ModelConfig& cfg) {
  if (!cfg.with_fusion) throw std::invalid_argument("forward_mef: model has no fusion parameters");
  auto fused = fusion_forward(b, kFusionPrefix, i1, i2).fused;
  auto out = forward(b, fused, cfg);
  out.fused = fused;
  return out;
}

namespace {

PipelineOutput to_plain(const VarPipelineOutput& v) {
  PipelineOutput out;
  for (const auto& o : v.outputs) out.outputs.push_back(o.value());
  out.final = clamp01(out.outputs.front());
  return out;
}

}  // namespace

PipelineOutput forward(const ParamStore& p, const Tensor& x, const ModelConfig& cfg) {
  return to_plain(forward(Binder(p, nullptr), ad::constant(x), cfg));
}

PipelineOutput forward_mef(const ParamStore& p, const Tensor& i1, const Tensor& i2, const ModelConfig& cfg) {
  return to_plain(forward_mef(Binder(p, nullptr), ad::constant(i1), ad::constant(i2), cfg));
}

// ---------------------------------------------------------------------------
// Weight files

namespace {

constexpr char kMagic[4] = {'H', 'D', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("weight file truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const ParamStore& p, DType dtype) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.size()));
  for (const auto& [name, t] : p.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape().size()));
    for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.vec()) {
      if (dtype == DType::F32) {
        put<float>(out, static_cast<float>(v));
      } else {
        put<double>(out, v);
      }
    }
  }
  return out;
}

ParamStore deserialize_params(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError("not a weight file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported weight file version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  ParamStore p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.get_string(r.get<std::uint32_t>());
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw FormatError("tensor '" + name + "': unknown dtype code " + std::to_string(dtype));
    Shape shape(r.get<std::uint8_t>());
    for (auto& d : shape) d = r.get<std::uint32_t>();
    Tensor t(shape);
    for (auto& v : t.vec()) v = dtype == 0 ? static_cast<double>(r.get<float>()) : r.get<double>();
    if (p.contains(name)) throw FormatError("duplicate tensor name '" + name + "'");
    p.add(name, std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after the last tensor");
  return p;
}

void save_params(const ParamStore& p, const std::filesystem::path& path, DType dtype) {
  const auto bytes = serialize_params(p, dtype);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

ParamStore load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

ModelConfig infer_config(const ParamStore& p) {
  ModelConfig cfg;
  std::size_t levels = 0;
  while (p.contains(stage_prefix(levels + 1) + "/entry/w")) ++levels;
  if (levels < 2) throw FormatError("weights do not describe a pipeline (need stage1/entry/w and stage2/entry/w)");
  cfg.levels = levels;
  const std::string s1 = stage_prefix(1);
  cfg.width = p.get(s1 + "/entry/w").dim(0);
  cfg.scales = 1;
  while (p.contains(s1 + "/down" + std::to_string(cfg.scales - 1) + "/w")) ++cfg.scales;
  cfg.blocks_per_scale = 0;
  while (p.contains(s1 + "/mid/blk" + std::to_string(cfg.blocks_per_scale) + "/ln1/gamma") ||
         p.contains(s1 + "/mid/blk" + std::to_string(cfg.blocks_per_scale) + "/conv/w")) {
    ++cfg.blocks_per_scale;
  }
  for (std::size_t k = 1; k <= levels; ++k) {
    const bool hdf = p.contains(stage_prefix(k) + "/mid/blk0/hfa/wq");
    cfg.kinds.push_back(hdf ? RestorerKind::Hdf : RestorerKind::Unet);
    if (hdf) {
      const auto& q = p.get(stage_prefix(k) + "/mid/blk0/ffn/q_re");
      const std::size_t mid_width = cfg.width << (cfg.scales - 1);
      cfg.block.ffn_expansion = q.dim(0) / mid_width;
      cfg.block.window = q.dim(1);
    }
  }
  if (p.contains(kFusionPrefix + "/conv1/w")) {
    cfg.with_fusion = true;
    cfg.fusion.width1 = p.get(kFusionPrefix + "/conv1/w").dim(0);
    cfg.fusion.width2 = p.get(kFusionPrefix + "/conv2/w").dim(0);
  }
  cfg.validate();

  // The inferred architecture must account for every tensor with a matching shape.
  const auto expect = init_params(0, cfg);
  if (expect.size() != p.size()) throw FormatError("weights contain tensors outside the inferred architecture");
  for (const auto& [name, t] : expect.entries()) {
    if (!p.contains(name)) throw FormatError("weights missing tensor '" + name + "'");
    if (p.get(name).shape() != t.shape()) throw FormatError("tensor '" + name + "' has an unexpected shape");
  }
  return cfg;
}

}  // namespace hdft
