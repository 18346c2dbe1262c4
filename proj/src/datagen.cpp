#include "vdlab/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "vdlab/dynamics.hpp"
#include "vdlab/rng.hpp"

namespace vdlab {

namespace {

// Steady-state throttle holding speed v on the straight.
double hold_throttle(const UnknownCoefficients& gt, double v) {
  const double denom = gt.c_m1() - gt.c_m2() * v;
  if (denom <= 0.0) return 1.0;
  return std::clamp((gt.c_r0() + gt.c_d() * v * v) / denom, 0.0, 1.0);
}

}  // namespace

Dataset pure_pursuit_drive(const Track& track, const KnownCoefficients& known,
                           const UnknownCoefficients& ground_truth, int laps, double rate_hz,
                           std::uint64_t seed, const ActuatorLimits& limits,
                           const PurePursuitConfig& config) {
  if (laps < 1) throw std::invalid_argument("pure_pursuit_drive: laps must be >= 1");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("pure_pursuit_drive: rate_hz must be positive");
  if (config.v_x0 < kVxFloor) {
    throw std::invalid_argument("pure_pursuit_drive: initial v_x below the floor");
  }

  const PolylinePath raceline(track.raceline);
  const PolylinePath centerline(track.centerline);
  const std::vector<double> profile = speed_profile(raceline, config.profile);
  const double ts = 1.0 / rate_hz;
  const double wheelbase = known.l_f + known.l_r;
  const double lap_length = raceline.length();

  Rng rng(seed);

  PoseState pose;
  const Vec2 p0 = raceline.point_at(0.0);
  const Vec2 t0 = raceline.tangent_at(0.0);
  pose.x = p0.x;
  pose.y = p0.y;
  pose.theta = std::atan2(t0.y, t0.x);

  VelocityState vel;
  vel.v_x = config.v_x0;
  vel.throttle = hold_throttle(ground_truth, config.v_x0);

  Dataset ds;
  ds.rate_hz = rate_hz;

  double progress = 0.0;
  double prev_s = raceline.project({pose.x, pose.y}).s;
  // Smoothed dither keeps excitation below the actuator rate limits.
  double dither_t = 0.0;
  double dither_s = 0.0;
  int step = 0;
  const int max_steps = static_cast<int>(1e7 / rate_hz) + 200000;

  while (progress < lap_length * laps) {
    const auto proj = raceline.project({pose.x, pose.y});

    // track containment
    const auto c_proj = centerline.project({pose.x, pose.y});
    if (std::abs(c_proj.lateral) > track.half_width) {
      throw DataGenError("pure_pursuit_drive: vehicle left the track at t=" +
                         std::to_string(step * ts) + " s (offset " +
                         std::to_string(c_proj.lateral) + " m)");
    }

    // pure-pursuit steering toward a speed-scaled lookahead point
    const double lookahead =
        std::max(config.lookahead_min, config.lookahead_gain * vel.v_x);
    const Vec2 target = raceline.point_at(proj.s + lookahead);
    const double dx = target.x - pose.x;
    const double dy = target.y - pose.y;
    const double local_x = std::cos(pose.theta) * dx + std::sin(pose.theta) * dy;
    const double local_y = -std::sin(pose.theta) * dx + std::cos(pose.theta) * dy;
    const double d2 = local_x * local_x + local_y * local_y;
    const double curvature = d2 > 1e-12 ? 2.0 * local_y / d2 : 0.0;

    dither_s = 0.95 * dither_s + 0.05 * rng.uniform(-1.0, 1.0);
    double steer_target = std::atan(wheelbase * curvature) + config.steer_dither * dither_s;
    steer_target = std::clamp(steer_target, -limits.steer_max, limits.steer_max);
    const double dsteer =
        std::clamp(steer_target - vel.steer, -limits.dsteer_max, limits.dsteer_max);

    // proportional throttle toward the curvature-limited target speed
    dither_t = 0.95 * dither_t + 0.05 * rng.uniform(-1.0, 1.0);
    const double v_target =
        profile_at(raceline, profile, proj.s) * (1.0 + config.throttle_dither * dither_t);
    double throttle_cmd =
        hold_throttle(ground_truth, v_target) + config.throttle_kp * (v_target - vel.v_x);
    throttle_cmd = std::clamp(throttle_cmd, 0.0, 1.0);
    const double dthrottle =
        std::clamp(throttle_cmd - vel.throttle, -limits.dthrottle_max, limits.dthrottle_max);

    const ControlInput input{dthrottle, dsteer};

    DatasetRow row;
    row.t = step * ts;
    row.pose = pose;
    row.vel = vel;
    row.session = 0;

    // advance the ground truth
    const PoseState next_pose = step_pose(pose, vel, ts);
    VelocityState next_vel;
    try {
      next_vel = step_velocity(vel, input, known, ground_truth, ts, limits);
    } catch (const std::domain_error& e) {
      throw DataGenError(std::string("pure_pursuit_drive: ") + e.what());
    }
    if (next_vel.v_x < kVxFloor) {
      throw DataGenError("pure_pursuit_drive: v_x hit the floor at t=" +
                         std::to_string(step * ts) + " s");
    }

    // Log the representable state deltas so dT_t == T_{t+1} - T_t holds
    // bit-for-bit in the emitted columns.
    row.input.dthrottle = next_vel.throttle - vel.throttle;
    row.input.dsteer = next_vel.steer - vel.steer;
    ds.rows.push_back(row);

    pose = next_pose;
    vel = next_vel;
    ++step;

    double dsarc = raceline.project({pose.x, pose.y}).s - prev_s;
    if (dsarc > lap_length / 2.0) dsarc -= lap_length;
    if (dsarc < -lap_length / 2.0) dsarc += lap_length;
    progress += dsarc;
    prev_s += dsarc;
    if (prev_s >= lap_length) prev_s -= lap_length;
    if (prev_s < 0.0) prev_s += lap_length;

    if (step > max_steps) {
      throw DataGenError("pure_pursuit_drive: lap goal never reached");
    }
  }
  return ds;
}

}  // namespace vdlab
