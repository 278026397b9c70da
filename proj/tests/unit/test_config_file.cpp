#include "doctest.h"
#include "scidvs/config_file.hpp"

using namespace scidvs;

TEST_CASE("key value parsing") {
  const auto kv = parse_key_values("# comment\n width = 32\n\nqe=0.4 # trailing\nscene.type = constant\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("width") == "32");
  CHECK(kv.at("qe") == "0.4");
  CHECK(kv.at("scene.type") == "constant");
}

TEST_CASE("malformed lines and duplicates are reported together") {
  try {
    parse_key_values("width = 4\nnonsense\nwidth = 8\n= 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.violations().size() == 3);
    CHECK(e.violations()[0].starts_with("line 2"));
    CHECK(e.violations()[1].find("duplicate") != std::string::npos);
    CHECK(e.violations()[2].starts_with("line 4"));
  }
}

TEST_CASE("config from key values") {
  const auto cfg = config_from_key_values(parse_key_values(
      "width = 32\nheight = 16\npreamp_enabled = off\nnoise_mode = analytic_gaussian\nseed = 99\n"
      "scene.base_lux = 3\n"));
  CHECK(cfg.width == 32);
  CHECK(cfg.height == 16);
  CHECK_FALSE(cfg.preamp_enabled);
  CHECK(cfg.noise_mode == NoiseMode::AnalyticGaussian);
  CHECK(cfg.seed == 99);
}

TEST_CASE("unknown keys and bad values are config errors") {
  CHECK_THROWS_AS(config_from_key_values(parse_key_values("wdth = 3\n")), ConfigError);
  CHECK_THROWS_AS(config_from_key_values(parse_key_values("width = 3.5\n")), ConfigError);
  CHECK_THROWS_AS(config_from_key_values(parse_key_values("binning_enabled = maybe\n")), ConfigError);
  CHECK_THROWS_AS(config_from_key_values(parse_key_values("qe = 0.5x\n")), ConfigError);
  SensorConfig cfg;
  CHECK_THROWS_AS(apply_config_key(cfg, "nope", "1"), ConfigError);
}

TEST_CASE("canonical text round trips") {
  SensorConfig cfg;
  cfg.width = 48;
  cfg.theta_on = 0.0904123456789;
  cfg.preamp_enabled = false;
  cfg.noise_mode = NoiseMode::Off;
  cfg.seed = 123456789012345ull;
  cfg.mismatch_sigma = 0.1;
  const auto back = config_from_key_values(parse_key_values(config_to_text(cfg)));
  CHECK(config_to_text(back) == config_to_text(cfg));
  CHECK(back.theta_on == cfg.theta_on);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("every key documents its units") {
  CHECK(config_keys().size() >= 20);
  for (const auto& k : config_keys()) {
    CHECK_FALSE(k.units.empty());
    CHECK(is_config_key(k.name));
  }
  CHECK_FALSE(is_config_key("scene.type"));
}

TEST_CASE("missing file is an io error") { CHECK_THROWS_AS(read_key_value_file("/nonexistent/cfg.txt"), IoError); }
