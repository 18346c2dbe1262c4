#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "vdlab/coefficients.hpp"
#include "vdlab/datagen.hpp"
#include "vdlab/model.hpp"
#include "vdlab/mpc.hpp"

namespace vdlab {

// Messages name the offending JSON field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One JSON file drives every pipeline command.
struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 7;

  std::string data_dir = "runs/data";
  std::string checkpoint_dir = "runs/checkpoints";
  std::string report_dir = "runs/reports";

  KnownCoefficients vehicle{0.041, 0.029, 0.033};
  double rate_hz = 50.0;
  ActuatorLimits limits;

  UnknownCoefficients ground_truth;  // simulator regime truth

  std::string bounds_mode = "sim";  // sim | real | explicit
  SimScaleRanges sim_ranges;
  std::optional<CoefficientBounds> explicit_bounds;

  int datagen_laps = 20;
  int datagen_target_rows = 1000;
  int datagen_warmup_rows = 100;
  PurePursuitConfig pure_pursuit;

  TrainConfig train;
  MpcConfig mpc;

  int race_track = 2;
  RaceOptions race;

  double eval_horizon_ms = 300.0;

  double ts() const { return 1.0 / rate_hz; }
  PhysicsContext physics() const { return {vehicle, limits, ts()}; }
  CoefficientBounds resolve_bounds() const;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace vdlab
