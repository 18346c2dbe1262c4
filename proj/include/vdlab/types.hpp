#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace vdlab {

// Identification state X = [v_x, v_y, omega, throttle, steer].
struct VelocityState {
  double v_x = 0.0;       // longitudinal velocity, m/s
  double v_y = 0.0;       // lateral velocity, m/s
  double omega = 0.0;     // yaw rate, rad/s
  double throttle = 0.0;  // commanded throttle, fraction in [0, 1]
  double steer = 0.0;     // steering angle, rad
};

struct PoseState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // inertial heading, wrapped to (-pi, pi]
};

// Per-step actuation deltas.
struct ControlInput {
  double dthrottle = 0.0;
  double dsteer = 0.0;
};

// Directly measurable vehicle properties.
struct KnownCoefficients {
  double m = 0.0;    // mass, kg
  double l_f = 0.0;  // CG to front axle, m
  double l_r = 0.0;  // CG to rear axle, m
};

struct ActuatorLimits {
  double steer_max = 0.35;      // rad
  double dthrottle_max = 0.05;  // per step
  double dsteer_max = 0.02;     // rad per step
};

// Index layout of the 17 estimated coefficients. Serialization and reports
// use the symbol names below, in this order.
enum CoefIndex : int {
  kBf = 0,
  kCf,
  kDf,
  kEf,
  kGf,
  kKf,
  kBr,
  kCr,
  kDr,
  kEr,
  kGr,
  kKr,
  kCm1,
  kCm2,
  kCr0,
  kCd,
  kIz,
  kNumCoef  // = 17
};

struct UnknownCoefficients {
  std::array<double, kNumCoef> v{};

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

  double b_f() const { return v[kBf]; }
  double c_f() const { return v[kCf]; }
  double d_f() const { return v[kDf]; }
  double e_f() const { return v[kEf]; }
  double g_f() const { return v[kGf]; }
  double k_f() const { return v[kKf]; }
  double b_r() const { return v[kBr]; }
  double c_r() const { return v[kCr]; }
  double d_r() const { return v[kDr]; }
  double e_r() const { return v[kEr]; }
  double g_r() const { return v[kGr]; }
  double k_r() const { return v[kKr]; }
  double c_m1() const { return v[kCm1]; }
  double c_m2() const { return v[kCm2]; }
  double c_r0() const { return v[kCr0]; }
  double c_d() const { return v[kCd]; }
  double i_z() const { return v[kIz]; }
};

inline constexpr std::array<std::string_view, kNumCoef> kCoefNames = {
    "B_f", "C_f", "D_f", "E_f", "G_f", "K_f", "B_r", "C_r", "D_r",
    "E_r", "G_r", "K_r", "C_m1", "C_m2", "C_r0", "C_d", "I_z"};

struct TireForces {
  double f_fy = 0.0;  // front lateral, N
  double f_ry = 0.0;  // rear lateral, N
  double f_rx = 0.0;  // rear longitudinal, N
  double alpha_f = 0.0;
  double alpha_r = 0.0;
};

}  // namespace vdlab
