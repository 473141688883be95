#include <doctest.h>

#include "hdft/config.hpp"

using namespace hdft;

TEST_CASE("config values and defaults") {
  const std::set<std::string> allowed = {"model.width", "train.lr", "train.iterations", "model.fusion", "data.gammas"};
  const auto cfg = Config::parse(
      "# comment\n"
      "model.width = 24\n"
      "\n"
      "train.lr=1e-3   # trailing comment\n"
      "model.fusion = true\n"
      "data.gammas = 0.4, 2.5\n",
      allowed);
  CHECK(cfg.get_uint("model.width", 16) == 24);
  CHECK(cfg.get_double("train.lr", 0.0) == 1e-3);
  CHECK(cfg.get_bool("model.fusion", false));
  CHECK(cfg.get_uint("train.iterations", 7) == 7);
  CHECK(cfg.get_list("data.gammas") == std::vector<std::string>{"0.4", "2.5"});
  CHECK_FALSE(cfg.has("train.iterations"));
}

TEST_CASE("config errors") {
  const std::set<std::string> allowed = {"a", "b"};
  CHECK_THROWS_AS(Config::parse("c = 1\n", allowed), ConfigError);
  CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n", allowed), ConfigError);
  CHECK_THROWS_AS(Config::parse("a 1\n", allowed), ConfigError);
  const auto cfg = Config::parse("a = x\nb = maybe\n", allowed);
  CHECK_THROWS_AS((void)cfg.get_double("a", 0.0), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_uint("a", 0), ConfigError);
  CHECK_THROWS_AS((void)cfg.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/hdft.cfg", allowed), ConfigError);
}
