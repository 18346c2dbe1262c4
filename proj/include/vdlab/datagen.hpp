#pragma once

#include <cstdint>
#include <stdexcept>

#include "vdlab/dataset.hpp"
#include "vdlab/track.hpp"
#include "vdlab/types.hpp"

namespace vdlab {

struct DataGenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PurePursuitConfig {
  double lookahead_gain = 0.3;  // seconds of preview per m/s
  double lookahead_min = 0.1;   // m
  double v_x0 = 1.0;            // initial speed, above the Euler-stable band
  double throttle_kp = 1.5;     // proportional speed control
  double throttle_dither = 0.04;   // seeded throttle-target perturbation
  double steer_dither = 0.008;     // seeded steering perturbation, rad
  SpeedProfileParams profile;
};

// Drives `laps` laps along the track raceline with geometric pure pursuit
// and a proportional speed controller, advancing the ground-truth model at
// rate_hz. Deterministic for a given seed. Aborts with DataGenError if the
// vehicle leaves the track or stalls at the v_x floor.
Dataset pure_pursuit_drive(const Track& track, const KnownCoefficients& known,
                           const UnknownCoefficients& ground_truth, int laps, double rate_hz,
                           std::uint64_t seed, const ActuatorLimits& limits,
                           const PurePursuitConfig& config = {});

}  // namespace vdlab
