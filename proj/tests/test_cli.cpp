#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hdft/image_io.hpp"
#include "hdft/pipeline.hpp"
#include "hdft/pyramid.hpp"
#include "hdft/training.hpp"
#include "oracles.hpp"

using namespace hdft;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class Workdir {
 public:
  Workdir() : dir_(fs::temp_directory_path() / "hdft_cli_test") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  Result run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const std::string cmd = std::string(HDFT_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out);
    std::stringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
  }

 private:
  fs::path dir_;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Tensor quantized_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  return decode_ppm(encode_ppm(oracle::random_tensor({3, h, w}, seed, 0.0, 1.0)));
}

void write_config(const fs::path& path, const std::string& extra = "", int iterations = 2) {
  std::ofstream(path) << "# tiny model\nmodel.levels = 2\nmodel.width = 4\nmodel.scales = 2\n"
                      << "train.iterations = " << iterations
                      << "\ntrain.crop = 16\ndata.count = 2\ndata.size = 24\n"
                      << extra;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  Workdir w;
  CHECK(w.run("").code == 1);
  CHECK(w.run("metrics --ref").code == 1);
  CHECK(w.run("metrics --bogus 1").code == 1);
  CHECK(w.run("grad-check --block nothing").code == 1);
  CHECK(w.run("bench --grid \"windows=64;maps=16\"").code == 1);
  CHECK(w.run("--help").code == 0);
}

TEST_CASE("metrics of an image against itself") {
  Workdir w;
  save_image(quantized_image(16, 16, 1), w / "a.ppm");
  const auto r = w.run("metrics --ref " + (w / "a.ppm").string() + " --test " + (w / "a.ppm").string());
  CHECK(r.code == 0);
  CHECK(r.out == "psnr=inf\nssim=1\n");
}

TEST_CASE("decompose writes one file per level and reconstruct inverts it") {
  Workdir w;
  // Smooth content keeps every residual inside the +-0.5 range an offset 8-bit file can hold.
  const auto img = decode_ppm(encode_ppm(synth_clean_image(2, 0, 32)));
  save_image(img, w / "x.ppm");
  const auto before = read_file(w / "x.ppm");
  REQUIRE(w.run("decompose --in " + (w / "x.ppm").string() + " --levels 4 --out-dir " + (w / "d").string()).code == 0);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(w / "d")) ++files;
  CHECK(files == 4);
  std::vector<std::string> comments;
  (void)load_image(w / "d" / "level1.ppm", &comments);
  CHECK(std::find(comments.begin(), comments.end(), "offset=0.5") != comments.end());
  CHECK(read_file(w / "x.ppm") == before);

  REQUIRE(w.run("reconstruct --in-dir " + (w / "d").string() + " --out " + (w / "y.ppm").string()).code == 0);
  // Each of the four stored levels carries up to half a code of rounding.
  const auto back = load_image(w / "y.ppm");
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 4.0 / 255.0 + 1e-12);
}

TEST_CASE("enhance with zero-initialized weights reproduces the input") {
  Workdir w;
  save_params(init_params(0, ModelConfig{}), w / "w.hdft");
  const auto img = quantized_image(40, 48, 3);
  save_image(img, w / "in.ppm");
  REQUIRE(w.run("enhance --weights " + (w / "w.hdft").string() + " --in " + (w / "in.ppm").string() + " --out " +
                (w / "out.ppm").string())
              .code == 0);
  CHECK(load_image(w / "out.ppm") == img);
}

TEST_CASE("fuse at initialization averages the exposures") {
  Workdir w;
  ModelConfig cfg;
  cfg.levels = 2;
  cfg.with_fusion = true;
  save_params(init_params(0, cfg), w / "w.hdft");
  const auto a = quantized_image(16, 16, 4), b = quantized_image(16, 16, 5);
  save_image(a, w / "a.ppm");
  save_image(b, w / "b.ppm");
  REQUIRE(w.run("fuse --weights " + (w / "w.hdft").string() + " --under " + (w / "a.ppm").string() + " --over " +
                (w / "b.ppm").string() + " --out " + (w / "f.ppm").string())
              .code == 0);
  const auto f = load_image(w / "f.ppm");
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(f[i] - 0.5 * (a[i] + b[i])) <= 0.5 / 255.0 + 1e-12);

  // Weights without a fusion block cannot fuse.
  save_params(init_params(0, ModelConfig{}), w / "plain.hdft");
  CHECK(w.run("fuse --weights " + (w / "plain.hdft").string() + " --under " + (w / "a.ppm").string() + " --over " +
              (w / "b.ppm").string() + " --out " + (w / "g.ppm").string())
            .code == 2);
}

TEST_CASE("runtime failures exit with 2") {
  Workdir w;
  std::ofstream(w / "bad.hdft") << "not a weight file";
  save_image(quantized_image(16, 16, 6), w / "a.ppm");
  CHECK(w.run("enhance --weights " + (w / "bad.hdft").string() + " --in " + (w / "a.ppm").string() + " --out " +
              (w / "o.ppm").string())
            .code == 2);
  std::ofstream(w / "bad.cfg") << "model.colour = red\n";
  CHECK(w.run("train --config " + (w / "bad.cfg").string() + " --out " + (w / "x.hdft").string()).code == 2);
}

TEST_CASE("train is deterministic given --seed and writes a history csv") {
  Workdir w;
  write_config(w / "t.cfg");
  const auto cfg = (w / "t.cfg").string();
  REQUIRE(w.run("--seed 4 train --quiet --config " + cfg + " --out " + (w / "a.hdft").string()).code == 0);
  REQUIRE(w.run("train --seed 4 --quiet --config " + cfg + " --out " + (w / "b.hdft").string()).code == 0);
  REQUIRE(w.run("train --quiet --config " + cfg + " --out " + (w / "c.hdft").string()).code == 0);
  CHECK(read_file(w / "a.hdft") == read_file(w / "b.hdft"));
  CHECK(read_file(w / "a.hdft") != read_file(w / "c.hdft"));
  CHECK(read_file(w / "a.csv") == read_file(w / "b.csv"));
  CHECK(read_file(w / "a.csv").rfind("iter,loss,psnr\n0,", 0) == 0);
  CHECK(infer_config(load_params(w / "a.hdft")).width == 4);
}

TEST_CASE("train resumes from a checkpoint") {
  Workdir w;
  write_config(w / "full.cfg");
  REQUIRE(w.run("train --quiet --config " + (w / "full.cfg").string() + " --out " + (w / "full.hdft").string()).code ==
          0);
  const auto ckpt = "train.checkpoint = " + (w / "run.ckpt").string() + "\ntrain.checkpoint_interval = 1\n";
  write_config(w / "first.cfg", ckpt, 1);
  write_config(w / "second.cfg", ckpt, 2);
  REQUIRE(w.run("train --quiet --config " + (w / "first.cfg").string() + " --out " + (w / "a.hdft").string()).code ==
          0);
  REQUIRE(w.run("train --quiet --resume --config " + (w / "second.cfg").string() + " --out " +
                (w / "b.hdft").string())
              .code == 0);
  CHECK(read_file(w / "b.hdft") == read_file(w / "full.hdft"));
  CHECK(read_file(w / "b.csv") == read_file(w / "full.csv"));

  write_config(w / "dup.cfg", "train.iterations = 1\n");
  CHECK(w.run("train --quiet --config " + (w / "dup.cfg").string() + " --out " + (w / "d.hdft").string()).code == 2);
}

TEST_CASE("bench writes the documented csv") {
  Workdir w;
  const auto r = w.run("bench --grid \"windows=4;maps=16;channels=2;mechanisms=hdf_block\" --out " +
                       (w / "r.csv").string());
  REQUIRE(r.code == 0);
  CHECK(r.out == "rows=1\n");
  const auto csv = read_file(w / "r.csv");
  CHECK(csv.find("mechanism,window,map,channels,flops,mean_ms,std_ms,repeats,buffer_bytes,status\n") !=
        std::string::npos);
}

TEST_CASE("grad-check reports pass lines") {
  Workdir w;
  const auto r = w.run("grad-check --block loss --precision f64");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("block=loss precision=f64 worst=", 0) == 0);
  CHECK(r.out.find("status=pass") != std::string::npos);
}
