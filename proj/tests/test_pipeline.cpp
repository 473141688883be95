#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hdft/pipeline.hpp"
#include "hdft/pyramid.hpp"
#include "test_util.hpp"

using namespace hdft;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.width = 4;
  return cfg;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hdft_test_" + name);
}

}  // namespace

TEST_CASE("identity at init and level sizes") {
  ModelConfig cfg;
  auto p = init_params(0, cfg);
  auto x = oracle::random_tensor({3, 64, 64}, 1, 0, 1);
  auto out = forward(p, x, cfg);
  REQUIRE(out.outputs.size() == 4);
  CHECK(out.outputs[0].dim(1) == 64);
  CHECK(out.outputs[1].dim(1) == 32);
  CHECK(out.outputs[2].dim(1) == 16);
  CHECK(out.outputs[3].dim(1) == 8);
  CHECK(max_abs_diff(out.outputs[0], x) < 1e-9);
  CHECK(max_abs_diff(out.final, x) < 1e-9);

  // Smallest legal input: the 4x4 base is padded up for its restorer.
  auto tiny = oracle::random_tensor({3, 32, 40}, 2, 0, 1);
  CHECK(max_abs_diff(forward(p, tiny, cfg).final, tiny) < 1e-9);
  CHECK_THROWS_AS(forward(p, Tensor({3, 31, 64}), cfg), ShapeError);
  CHECK_THROWS_AS(forward(p, Tensor({1, 64, 64}), cfg), ShapeError);
}

TEST_CASE("default stage assignment and per-stage override") {
  ModelConfig cfg = small_config();
  auto p = init_params(0, cfg);
  CHECK_FALSE(p.contains("stage1/mid/blk0/hfa/wq"));
  CHECK(p.contains("stage1/mid/blk0/conv/w"));
  for (int k = 2; k <= 4; ++k) CHECK(p.contains("stage" + std::to_string(k) + "/mid/blk0/hfa/wq"));

  cfg.kinds = {RestorerKind::Hdf, RestorerKind::Hdf, RestorerKind::Hdf, RestorerKind::Unet};
  auto q = init_params(0, cfg);
  CHECK(q.contains("stage1/mid/blk0/hfa/wq"));
  CHECK(q.contains("stage4/mid/blk0/conv/w"));
  cfg.kinds.pop_back();
  CHECK_THROWS_AS(init_params(0, cfg), std::invalid_argument);
}

TEST_CASE("init is deterministic per seed") {
  auto cfg = small_config();
  CHECK(init_params(7, cfg) == init_params(7, cfg));
  auto a = init_params(7, cfg), b = init_params(8, cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= !(a.entries()[i].second == b.entries()[i].second);
  CHECK(differs);
}

TEST_CASE("perturbing stage k only affects outputs at levels <= k") {
  auto cfg = small_config();
  auto p = testutil::randomized(init_params(0, cfg), 3, 0.2);
  auto x = oracle::random_tensor({3, 32, 32}, 4, 0, 1);
  auto base = forward(p, x, cfg);
  for (std::size_t k = 1; k <= 4; ++k) {
    auto q = p;
    auto& t = q.get(stage_prefix(k) + "/exit/b");
    t[0] += 0.05;
    auto out = forward(q, x, cfg);
    for (std::size_t i = 1; i <= 4; ++i) {
      INFO("stage " << k << " level " << i);
      const double d = max_abs_diff(out.outputs[i - 1], base.outputs[i - 1]);
      if (i <= k) CHECK(d > 0.0);
      else CHECK(d == 0.0);
    }
  }
}

TEST_CASE("forward is deterministic") {
  auto cfg = small_config();
  auto p = testutil::randomized(init_params(0, cfg), 5, 0.2);
  auto x = oracle::random_tensor({3, 32, 32}, 6, 0, 1);
  CHECK(forward(p, x, cfg).outputs[0] == forward(p, x, cfg).outputs[0]);
}

TEST_CASE("mef forward") {
  auto cfg = small_config();
  cfg.with_fusion = true;
  auto p = init_params(1, cfg);
  auto img = oracle::random_tensor({3, 32, 32}, 7, 0, 1);
  auto out = forward_mef(p, img, img, cfg);
  CHECK(out.final.shape() == img.shape());
  CHECK(max_abs_diff(out.final, img) < 1e-9);
  auto other = oracle::random_tensor({3, 32, 32}, 8, 0, 1);
  CHECK(forward_mef(p, img, other, cfg).final.shape() == img.shape());
  CHECK_THROWS_AS(forward_mef(init_params(1, small_config()), img, img, small_config()), std::invalid_argument);
}

TEST_CASE("pipeline gradients pass finite differences at toy size") {
  ModelConfig cfg;
  cfg.levels = 2;
  cfg.width = 4;
  cfg.with_fusion = true;
  auto p = testutil::randomized(init_params(0, cfg), 9, 0.3);
  auto i1 = oracle::random_tensor({3, 16, 16}, 10, 0, 1), i2 = oracle::random_tensor({3, 16, 16}, 11, 0, 1);
  auto fn = [&](const Binder& b) {
    auto out = forward_mef(b, ad::constant(i1), ad::constant(i2), cfg);
    return ad::add(testutil::project(out.outputs[0], 12), testutil::project(out.outputs[1], 13));
  };
  for (const char* stage : {"stage1", "stage2"}) {
    testutil::check_report(grad_check(fn, p, 1e-6, {.max_entries_per_param = 12, .only_prefix = stage}), 1e-6);
  }
  testutil::check_report(
      grad_check(fn, p, 1e-6, {.step = 1e-6, .max_entries_per_param = 12, .only_prefix = "fusion"}), 1e-6);
}

TEST_CASE("weight files") {
  auto cfg = small_config();
  cfg.with_fusion = true;
  auto p = testutil::randomized(init_params(2, cfg), 14);
  const auto path = temp_file("weights.hdft"), path2 = temp_file("weights2.hdft");
  save_params(p, path);
  auto loaded = load_params(path);
  CHECK(loaded == p);
  save_params(loaded, path2);
  CHECK(serialize_params(loaded) == serialize_params(p));
  {
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  auto inferred = infer_config(loaded);
  CHECK(inferred.levels == 4);
  CHECK(inferred.width == 4);
  CHECK(inferred.with_fusion);
  CHECK(inferred.kind(1) == RestorerKind::Unet);
  CHECK(inferred.kind(4) == RestorerKind::Hdf);
  CHECK(inferred.block.window == 8);
  CHECK(inferred.block.ffn_expansion == 2);

  auto bytes = serialize_params(p);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_params(bad), FormatError);
  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(deserialize_params(version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_params(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_params(trailing), FormatError);

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("weight file size arithmetic and duplicate names") {
  ParamStore p;
  p.add("a", Tensor({2, 3}, 1.5));
  p.add("bb", Tensor({4}, -2.0));
  // header 4+4+4; record = 4 + name + 1 + 1 + 4*rank + 8*count
  const std::size_t expect = 12 + (4 + 1 + 2 + 8 + 48) + (4 + 2 + 2 + 4 + 32);
  CHECK(serialize_params(p).size() == expect);
  const std::size_t expect32 = 12 + (4 + 1 + 2 + 8 + 24) + (4 + 2 + 2 + 4 + 16);
  auto bytes32 = serialize_params(p, DType::F32);
  CHECK(bytes32.size() == expect32);
  CHECK(deserialize_params(bytes32) == p);  // values are exactly representable

  ParamStore q;
  q.add("a", Tensor({1}, 0.0));
  auto one = serialize_params(q);
  std::vector<std::uint8_t> dup(one.begin(), one.end());
  dup[8] = 2;  // tensor count
  dup.insert(dup.end(), one.begin() + 12, one.end());
  CHECK_THROWS_AS(deserialize_params(dup), FormatError);
}

TEST_CASE("infer_config rejects foreign tensors") {
  auto cfg = small_config();
  auto p = init_params(0, cfg);
  p.add("stage1/extra", Tensor({1}));
  CHECK_THROWS_AS(infer_config(p), FormatError);
  ParamStore empty;
  CHECK_THROWS_AS(infer_config(empty), FormatError);
}
