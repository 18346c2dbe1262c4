#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "vdlab/config.hpp"

using namespace vdlab;

namespace {

std::string temp_write(const char* name, const std::string& text) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("default config round trips through JSON") {
  const RunConfig def = default_run_config();
  const std::string path = temp_write("vdlab_cfg.json", run_config_to_json(def));
  const RunConfig back = load_run_config(path);
  CHECK(back.seed == def.seed);
  CHECK(back.vehicle.m == def.vehicle.m);
  CHECK(back.rate_hz == def.rate_hz);
  CHECK(back.ground_truth.v == def.ground_truth.v);
  CHECK(back.train.batch_size == def.train.batch_size);
  CHECK(back.mpc.horizon == def.mpc.horizon);
  CHECK(back.race.v_x0 == def.race.v_x0);
  CHECK(run_config_to_json(back) == run_config_to_json(def));
  std::remove(path.c_str());
}

TEST_CASE("bounds resolution: sim, real, explicit") {
  RunConfig c = default_run_config();
  c.bounds_mode = "sim";
  const auto sim = c.resolve_bounds();
  CHECK(sim.lower[kIz] == doctest::Approx(0.5 * 2.78e-5));
  CHECK(sim.upper[kBf] == 30.0);

  c.bounds_mode = "real";
  const auto real = c.resolve_bounds();
  CHECK(real.lower[kIz] == 500.0);

  c.bounds_mode = "explicit";
  CHECK_THROWS_AS(c.resolve_bounds(), ConfigError);
  CoefficientBounds b = real_nominal_bounds();
  c.explicit_bounds = b;
  CHECK(c.resolve_bounds().upper[kDf] == 10000.0);

  c.bounds_mode = "bogus";
  CHECK_THROWS_AS(c.resolve_bounds(), ConfigError);
}

TEST_CASE("config errors name the offending field") {
  const std::string path = temp_write("vdlab_bad1.json", R"({"vehicle": {"m": 0.041}})");
  try {
    load_run_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("vehicle.l_f") != std::string::npos);
  }
  std::remove(path.c_str());

  const std::string path2 =
      temp_write("vdlab_bad2.json", R"({"train": {"batch_size": 0}})");
  try {
    load_run_config(path2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.batch_size") != std::string::npos);
  }
  std::remove(path2.c_str());

  const std::string path3 = temp_write("vdlab_bad3.json", "not json at all");
  CHECK_THROWS_AS(load_run_config(path3), ConfigError);
  std::remove(path3.c_str());

  const std::string path4 =
      temp_write("vdlab_bad4.json", R"({"train": {"validation_fraction": 1.5}})");
  try {
    load_run_config(path4);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("validation_fraction") != std::string::npos);
  }
  std::remove(path4.c_str());

  const std::string path5 = temp_write(
      "vdlab_bad5.json", R"({"mpc": {"q": [1.0, 2.0, 2.0, 1.0]}})");
  try {
    load_run_config(path5);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mpc") != std::string::npos);
  }
  std::remove(path5.c_str());
}

TEST_CASE("missing file and wrong schema version are config errors") {
  CHECK_THROWS_AS(load_run_config("/definitely/not/here.json"), ConfigError);
  const std::string path = temp_write("vdlab_bad6.json", R"({"schema_version": 9})");
  CHECK_THROWS_AS(load_run_config(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("explicit bounds block is parsed and validated") {
  RunConfig def = default_run_config();
  def.bounds_mode = "explicit";
  std::string json = run_config_to_json(def);
  // inject a bounds object
  nlohmann::json j = nlohmann::json::parse(json);
  nlohmann::json bounds;
  const auto real = real_nominal_bounds();
  for (int i = 0; i < kNumCoef; ++i) {
    bounds[std::string(kCoefNames[static_cast<std::size_t>(i)])] = {
        real.lower[static_cast<std::size_t>(i)], real.upper[static_cast<std::size_t>(i)]};
  }
  j["bounds"] = bounds;
  const std::string path = temp_write("vdlab_cfg_bounds.json", j.dump());
  const RunConfig back = load_run_config(path);
  CHECK(back.resolve_bounds().upper[kIz] == 2000.0);

  j["bounds"]["B_f"] = {30.0, 5.0};  // crossed interval
  const std::string path2 = temp_write("vdlab_cfg_bounds_bad.json", j.dump());
  CHECK_THROWS_AS(load_run_config(path2), ConfigError);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
