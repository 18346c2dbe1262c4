#pragma once

#include <array>

#include "vdlab/types.hpp"

namespace vdlab {

// Slip angles are undefined as v_x -> 0; the model refuses to evaluate below
// this floor instead of clamping silently.
inline constexpr double kVxFloor = 0.05;

// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

struct SlipAngles {
  double alpha_f = 0.0;
  double alpha_r = 0.0;
};

// alpha_f = steer - atan((omega*l_f + v_y)/v_x) + G_f
// alpha_r =         atan((omega*l_r - v_y)/v_x) + G_r
// Throws std::domain_error when v_x < kVxFloor.
SlipAngles slip_angles(const VelocityState& state, const KnownCoefficients& known,
                       const UnknownCoefficients& coeffs);

// Magic Formula with offsets: F = K + D*sin(C*atan(B*a - E*(B*a - atan(B*a)))).
double pacejka_force(double alpha, double b, double c, double d, double e, double k);

struct LateralForces {
  double f_fy = 0.0;
  double f_ry = 0.0;
};

LateralForces lateral_tire_forces(const SlipAngles& slip, const UnknownCoefficients& coeffs);

// F_rx = (C_m1 - C_m2*v_x)*T - C_r0 - C_d*v_x^2
double drivetrain_force(const VelocityState& state, const UnknownCoefficients& coeffs);

TireForces tire_forces(const VelocityState& state, const KnownCoefficients& known,
                       const UnknownCoefficients& coeffs);

// One forward-Euler step of the velocity state. Throttle and steer advance by
// the input deltas and are clamped to [0,1] and +/-steer_max.
VelocityState step_velocity(const VelocityState& state, const ControlInput& input,
                            const KnownCoefficients& known, const UnknownCoefficients& coeffs,
                            double ts, const ActuatorLimits& limits);

// One forward-Euler step of the pose; theta comes out wrapped.
PoseState step_pose(const PoseState& pose, const VelocityState& state, double ts);

// ---------------------------------------------------------------------------
// Reverse-mode support. The velocity step is evaluated through a cache that
// records every intermediate; the VJP maps an adjoint of the next state back
// to adjoints of the current state, the input, the coefficients and (when the
// drivetrain model is bypassed) the injected longitudinal force.
// ---------------------------------------------------------------------------

struct VelocityStepCache {
  // inputs
  VelocityState state;
  ControlInput input;
  KnownCoefficients known;
  UnknownCoefficients coeffs;
  double ts = 0.0;
  ActuatorLimits limits;
  bool fixed_frx = false;  // true: f_rx injected, drivetrain coefficients unused
  // intermediates
  double u_f = 0.0, u_r = 0.0;
  double alpha_f = 0.0, alpha_r = 0.0;
  double s_f = 0.0, s_r = 0.0;        // B*alpha
  double atan_s_f = 0.0, atan_s_r = 0.0;
  double psi_f = 0.0, psi_r = 0.0;
  double phi_f = 0.0, phi_r = 0.0;    // atan(psi)
  double f_fy = 0.0, f_ry = 0.0, f_rx = 0.0;
  bool throttle_clamped = false;
  bool steer_clamped = false;
  VelocityState next;
};

// Adjoints produced by the velocity-step VJP.
struct VelocityStepAdjoint {
  std::array<double, 5> state{};   // d/d(v_x, v_y, omega, throttle, steer)
  std::array<double, 2> input{};   // d/d(dthrottle, dsteer)
  std::array<double, kNumCoef> coeffs{};
  double frx = 0.0;  // only meaningful when cache.fixed_frx
};

// Forward pass. When fixed_frx >= 0 arguments are given via inject_frx.
VelocityStepCache step_velocity_record(const VelocityState& state, const ControlInput& input,
                                       const KnownCoefficients& known,
                                       const UnknownCoefficients& coeffs, double ts,
                                       const ActuatorLimits& limits);

// Same step with the drivetrain model replaced by an externally supplied
// longitudinal force (used by the direct-force baseline).
VelocityStepCache step_velocity_record_fixed_frx(const VelocityState& state,
                                                 const ControlInput& input,
                                                 const KnownCoefficients& known,
                                                 const UnknownCoefficients& coeffs, double frx,
                                                 double ts, const ActuatorLimits& limits);

// adj_next is the adjoint of (v_x', v_y', omega', throttle', steer').
VelocityStepAdjoint step_velocity_vjp(const VelocityStepCache& cache,
                                      const std::array<double, 5>& adj_next);

struct PoseStepAdjoint {
  std::array<double, 3> pose{};      // d/d(x, y, theta)
  std::array<double, 3> velocity{};  // d/d(v_x, v_y, omega)
};

PoseStepAdjoint step_pose_vjp(const PoseState& pose, const VelocityState& state, double ts,
                              const std::array<double, 3>& adj_next);

}  // namespace vdlab
