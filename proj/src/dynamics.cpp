#include "vdlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdlab {

double wrap_angle(double theta) {
  theta = std::remainder(theta, 2.0 * M_PI);
  if (theta <= -M_PI) theta += 2.0 * M_PI;  // remainder returns [-pi, pi]
  return theta;
}

SlipAngles slip_angles(const VelocityState& state, const KnownCoefficients& known,
                       const UnknownCoefficients& coeffs) {
  if (state.v_x < kVxFloor) {
    throw std::domain_error("slip_angles: v_x below floor (" + std::to_string(state.v_x) + " m/s)");
  }
  SlipAngles out;
  out.alpha_f = state.steer - std::atan((state.omega * known.l_f + state.v_y) / state.v_x) +
                coeffs.g_f();
  out.alpha_r = std::atan((state.omega * known.l_r - state.v_y) / state.v_x) + coeffs.g_r();
  return out;
}

double pacejka_force(double alpha, double b, double c, double d, double e, double k) {
  const double s = b * alpha;
  const double psi = s - e * (s - std::atan(s));
  return k + d * std::sin(c * std::atan(psi));
}

LateralForces lateral_tire_forces(const SlipAngles& slip, const UnknownCoefficients& coeffs) {
  LateralForces out;
  out.f_fy = pacejka_force(slip.alpha_f, coeffs.b_f(), coeffs.c_f(), coeffs.d_f(), coeffs.e_f(),
                           coeffs.k_f());
  out.f_ry = pacejka_force(slip.alpha_r, coeffs.b_r(), coeffs.c_r(), coeffs.d_r(), coeffs.e_r(),
                           coeffs.k_r());
  return out;
}

double drivetrain_force(const VelocityState& state, const UnknownCoefficients& coeffs) {
  return (coeffs.c_m1() - coeffs.c_m2() * state.v_x) * state.throttle - coeffs.c_r0() -
         coeffs.c_d() * state.v_x * state.v_x;
}

TireForces tire_forces(const VelocityState& state, const KnownCoefficients& known,
                       const UnknownCoefficients& coeffs) {
  const SlipAngles slip = slip_angles(state, known, coeffs);
  const LateralForces lat = lateral_tire_forces(slip, coeffs);
  TireForces out;
  out.alpha_f = slip.alpha_f;
  out.alpha_r = slip.alpha_r;
  out.f_fy = lat.f_fy;
  out.f_ry = lat.f_ry;
  out.f_rx = drivetrain_force(state, coeffs);
  return out;
}

namespace {

VelocityStepCache record_step(const VelocityState& state, const ControlInput& input,
                              const KnownCoefficients& known, const UnknownCoefficients& coeffs,
                              double ts, const ActuatorLimits& limits, bool fixed_frx,
                              double injected_frx) {
  if (state.v_x < kVxFloor) {
    throw std::domain_error("step_velocity: v_x below floor (" + std::to_string(state.v_x) +
                            " m/s)");
  }
  if (ts <= 0.0) throw std::invalid_argument("step_velocity: ts must be positive");

  VelocityStepCache c;
  c.state = state;
  c.input = input;
  c.known = known;
  c.coeffs = coeffs;
  c.ts = ts;
  c.limits = limits;
  c.fixed_frx = fixed_frx;

  c.u_f = (state.omega * known.l_f + state.v_y) / state.v_x;
  c.u_r = (state.omega * known.l_r - state.v_y) / state.v_x;
  c.alpha_f = state.steer - std::atan(c.u_f) + coeffs.g_f();
  c.alpha_r = std::atan(c.u_r) + coeffs.g_r();

  c.s_f = coeffs.b_f() * c.alpha_f;
  c.atan_s_f = std::atan(c.s_f);
  c.psi_f = c.s_f - coeffs.e_f() * (c.s_f - c.atan_s_f);
  c.phi_f = std::atan(c.psi_f);
  c.f_fy = coeffs.k_f() + coeffs.d_f() * std::sin(coeffs.c_f() * c.phi_f);

  c.s_r = coeffs.b_r() * c.alpha_r;
  c.atan_s_r = std::atan(c.s_r);
  c.psi_r = c.s_r - coeffs.e_r() * (c.s_r - c.atan_s_r);
  c.phi_r = std::atan(c.psi_r);
  c.f_ry = coeffs.k_r() + coeffs.d_r() * std::sin(coeffs.c_r() * c.phi_r);

  c.f_rx = fixed_frx ? injected_frx : drivetrain_force(state, coeffs);

  const double m = known.m;
  const double sin_d = std::sin(state.steer);
  const double cos_d = std::cos(state.steer);

  VelocityState next;
  next.v_x = state.v_x + ts * (c.f_rx - c.f_fy * sin_d + m * state.v_y * state.omega) / m;
  next.v_y = state.v_y + ts * (c.f_ry + c.f_fy * cos_d - m * state.v_x * state.omega) / m;
  next.omega = state.omega +
               ts * (c.f_fy * known.l_f * cos_d - c.f_ry * known.l_r) / coeffs.i_z();

  const double throttle_raw = state.throttle + input.dthrottle;
  next.throttle = std::clamp(throttle_raw, 0.0, 1.0);
  c.throttle_clamped = next.throttle != throttle_raw;

  const double steer_raw = state.steer + input.dsteer;
  next.steer = std::clamp(steer_raw, -limits.steer_max, limits.steer_max);
  c.steer_clamped = next.steer != steer_raw;

  c.next = next;
  return c;
}

// Shared Pacejka VJP: given dF, accumulates into the per-axle coefficient
// adjoints and returns d/d(alpha).
double pacejka_vjp(double adj_f, double alpha, double s, double atan_s, double psi, double phi,
                   double b, double c, double d, double e, double& adj_b, double& adj_c,
                   double& adj_d, double& adj_e, double& adj_k) {
  const double sin_cphi = std::sin(c * phi);
  const double cos_cphi = std::cos(c * phi);
  adj_k += adj_f;
  adj_d += adj_f * sin_cphi;
  const double adj_cphi = adj_f * d * cos_cphi;
  adj_c += adj_cphi * phi;
  const double adj_phi = adj_cphi * c;
  const double adj_psi = adj_phi / (1.0 + psi * psi);
  adj_e += adj_psi * -(s - atan_s);
  const double adj_s = adj_psi * (1.0 - e * (1.0 - 1.0 / (1.0 + s * s)));
  adj_b += adj_s * alpha;
  return adj_s * b;  // d/d(alpha)
}

}  // namespace

VelocityStepCache step_velocity_record(const VelocityState& state, const ControlInput& input,
                                       const KnownCoefficients& known,
                                       const UnknownCoefficients& coeffs, double ts,
                                       const ActuatorLimits& limits) {
  return record_step(state, input, known, coeffs, ts, limits, false, 0.0);
}

VelocityStepCache step_velocity_record_fixed_frx(const VelocityState& state,
                                                 const ControlInput& input,
                                                 const KnownCoefficients& known,
                                                 const UnknownCoefficients& coeffs, double frx,
                                                 double ts, const ActuatorLimits& limits) {
  return record_step(state, input, known, coeffs, ts, limits, true, frx);
}

VelocityState step_velocity(const VelocityState& state, const ControlInput& input,
                            const KnownCoefficients& known, const UnknownCoefficients& coeffs,
                            double ts, const ActuatorLimits& limits) {
  return record_step(state, input, known, coeffs, ts, limits, false, 0.0).next;
}

PoseState step_pose(const PoseState& pose, const VelocityState& state, double ts) {
  if (ts <= 0.0) throw std::invalid_argument("step_pose: ts must be positive");
  const double sin_t = std::sin(pose.theta);
  const double cos_t = std::cos(pose.theta);
  PoseState next;
  next.x = pose.x + (state.v_x * cos_t - state.v_y * sin_t) * ts;
  next.y = pose.y + (state.v_x * sin_t + state.v_y * cos_t) * ts;
  next.theta = wrap_angle(pose.theta + state.omega * ts);
  return next;
}

VelocityStepAdjoint step_velocity_vjp(const VelocityStepCache& c,
                                      const std::array<double, 5>& adj_next) {
  const double g_vx = adj_next[0];
  const double g_vy = adj_next[1];
  const double g_w = adj_next[2];
  const double g_T = adj_next[3];
  const double g_d = adj_next[4];

  const double m = c.known.m;
  const double ts = c.ts;
  const double iz = c.coeffs.i_z();
  const double sin_d = std::sin(c.state.steer);
  const double cos_d = std::cos(c.state.steer);

  VelocityStepAdjoint a;

  // Force adjoints from the three velocity rows.
  const double adj_frx = g_vx * ts / m;
  const double adj_ffy = -g_vx * ts * sin_d / m + g_vy * ts * cos_d / m +
                         g_w * ts * c.known.l_f * cos_d / iz;
  const double adj_fry = g_vy * ts / m - g_w * ts * c.known.l_r / iz;

  a.coeffs[kIz] = -g_w * ts * (c.f_fy * c.known.l_f * cos_d - c.f_ry * c.known.l_r) / (iz * iz);

  // Direct trig dependence of the velocity rows on the current steer.
  double adj_steer = -g_vx * ts * c.f_fy * cos_d / m - g_vy * ts * c.f_fy * sin_d / m -
                     g_w * ts * c.f_fy * c.known.l_f * sin_d / iz;

  // Pacejka chains.
  const double adj_alpha_f =
      pacejka_vjp(adj_ffy, c.alpha_f, c.s_f, c.atan_s_f, c.psi_f, c.phi_f, c.coeffs.b_f(),
                  c.coeffs.c_f(), c.coeffs.d_f(), c.coeffs.e_f(), a.coeffs[kBf], a.coeffs[kCf],
                  a.coeffs[kDf], a.coeffs[kEf], a.coeffs[kKf]);
  const double adj_alpha_r =
      pacejka_vjp(adj_fry, c.alpha_r, c.s_r, c.atan_s_r, c.psi_r, c.phi_r, c.coeffs.b_r(),
                  c.coeffs.c_r(), c.coeffs.d_r(), c.coeffs.e_r(), a.coeffs[kBr], a.coeffs[kCr],
                  a.coeffs[kDr], a.coeffs[kEr], a.coeffs[kKr]);

  a.coeffs[kGf] = adj_alpha_f;
  a.coeffs[kGr] = adj_alpha_r;
  adj_steer += adj_alpha_f;  // alpha_f = steer - atan(u_f) + G_f

  const double vx = c.state.v_x;
  const double adj_u_f = -adj_alpha_f / (1.0 + c.u_f * c.u_f);
  const double adj_u_r = adj_alpha_r / (1.0 + c.u_r * c.u_r);

  double adj_vx = adj_u_f * (-c.u_f / vx) + adj_u_r * (-c.u_r / vx);
  double adj_vy = adj_u_f / vx - adj_u_r / vx;
  double adj_omega = adj_u_f * c.known.l_f / vx + adj_u_r * c.known.l_r / vx;
  double adj_throttle = 0.0;

  // Drivetrain chain (skipped when the force was injected).
  if (c.fixed_frx) {
    a.frx = adj_frx;
  } else {
    a.coeffs[kCm1] = adj_frx * c.state.throttle;
    a.coeffs[kCm2] = -adj_frx * c.state.v_x * c.state.throttle;
    a.coeffs[kCr0] = -adj_frx;
    a.coeffs[kCd] = -adj_frx * c.state.v_x * c.state.v_x;
    adj_vx += adj_frx * (-c.coeffs.c_m2() * c.state.throttle - 2.0 * c.coeffs.c_d() * c.state.v_x);
    adj_throttle += adj_frx * (c.coeffs.c_m1() - c.coeffs.c_m2() * c.state.v_x);
  }

  // Euler carry terms.
  adj_vx += g_vx + g_vy * (-ts * c.state.omega);
  adj_vy += g_vy + g_vx * (ts * c.state.omega);
  adj_omega += g_w + g_vx * (ts * c.state.v_y) - g_vy * (ts * c.state.v_x);

  // Throttle/steer passthrough; clamped values have zero subgradient.
  const double t_gate = c.throttle_clamped ? 0.0 : 1.0;
  const double s_gate = c.steer_clamped ? 0.0 : 1.0;
  adj_throttle += g_T * t_gate;
  adj_steer += g_d * s_gate;

  a.state = {adj_vx, adj_vy, adj_omega, adj_throttle, adj_steer};
  a.input = {g_T * t_gate, g_d * s_gate};
  return a;
}

PoseStepAdjoint step_pose_vjp(const PoseState& pose, const VelocityState& state, double ts,
                              const std::array<double, 3>& adj_next) {
  const double gx = adj_next[0];
  const double gy = adj_next[1];
  const double gt = adj_next[2];
  const double sin_t = std::sin(pose.theta);
  const double cos_t = std::cos(pose.theta);

  PoseStepAdjoint a;
  a.pose[0] = gx;
  a.pose[1] = gy;
  a.pose[2] = gt + gx * ts * (-state.v_x * sin_t - state.v_y * cos_t) +
              gy * ts * (state.v_x * cos_t - state.v_y * sin_t);
  a.velocity[0] = gx * ts * cos_t + gy * ts * sin_t;
  a.velocity[1] = -gx * ts * sin_t + gy * ts * cos_t;
  a.velocity[2] = gt * ts;
  return a;
}

}  // namespace vdlab
