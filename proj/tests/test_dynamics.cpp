#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vdlab/dynamics.hpp"
#include "vdlab/rng.hpp"

using namespace vdlab;

namespace {

KnownCoefficients test_known() { return {0.041, 0.029, 0.033}; }

// Simulator-truth style coefficients (lateral entries from the nominal
// vehicle; drivetrain values chosen at the same scale).
UnknownCoefficients test_coeffs() {
  UnknownCoefficients c;
  c[kBf] = 5.579;
  c[kCf] = 1.2;
  c[kDf] = 0.192;
  c[kEf] = -0.083;
  c[kBr] = 5.385;
  c[kCr] = 1.269;
  c[kDr] = 0.173;
  c[kEr] = -0.019;
  c[kCm1] = 0.287;
  c[kCm2] = 0.0545;
  c[kCr0] = 0.0218;
  c[kCd] = 0.00035;
  c[kIz] = 2.78e-5;
  return c;
}

UnknownCoefficients random_coeffs(Rng& rng) {
  UnknownCoefficients c;
  c[kBf] = rng.uniform(5.0, 30.0);
  c[kCf] = rng.uniform(0.5, 2.0);
  c[kDf] = rng.uniform(0.05, 0.5);
  c[kEf] = rng.uniform(-2.0, 0.0);
  c[kGf] = rng.uniform(-0.1, 0.1);
  c[kKf] = rng.uniform(-0.05, 0.05);
  c[kBr] = rng.uniform(5.0, 30.0);
  c[kCr] = rng.uniform(0.5, 2.0);
  c[kDr] = rng.uniform(0.05, 0.5);
  c[kEr] = rng.uniform(-2.0, 0.0);
  c[kGr] = rng.uniform(-0.1, 0.1);
  c[kKr] = rng.uniform(-0.05, 0.05);
  c[kCm1] = rng.uniform(0.15, 0.6);
  c[kCm2] = rng.uniform(0.03, 0.1);
  c[kCr0] = rng.uniform(0.01, 0.1);
  c[kCd] = rng.uniform(1e-4, 7e-4);
  c[kIz] = rng.uniform(1.4e-5, 5.5e-5);
  return c;
}

VelocityState random_state(Rng& rng) {
  VelocityState s;
  s.v_x = rng.uniform(0.5, 3.0);
  s.v_y = rng.uniform(-0.3, 0.3);
  s.omega = rng.uniform(-3.0, 3.0);
  s.throttle = rng.uniform(0.0, 1.0);
  s.steer = rng.uniform(-0.3, 0.3);
  return s;
}

// Literal transcription of the state equations, kept independent of the
// implementation under test.
VelocityState oracle_step(const VelocityState& s, const ControlInput& u,
                          const KnownCoefficients& k, const UnknownCoefficients& c, double ts,
                          const ActuatorLimits& lim) {
  const double af = s.steer - std::atan((s.omega * k.l_f + s.v_y) / s.v_x) + c[kGf];
  const double ar = std::atan((s.omega * k.l_r - s.v_y) / s.v_x) + c[kGr];
  const double ffy =
      c[kKf] + c[kDf] * std::sin(c[kCf] * std::atan(c[kBf] * af -
                                                    c[kEf] * (c[kBf] * af - std::atan(c[kBf] * af))));
  const double fry =
      c[kKr] + c[kDr] * std::sin(c[kCr] * std::atan(c[kBr] * ar -
                                                    c[kEr] * (c[kBr] * ar - std::atan(c[kBr] * ar))));
  const double frx = (c[kCm1] - c[kCm2] * s.v_x) * s.throttle - c[kCr0] - c[kCd] * s.v_x * s.v_x;
  VelocityState n;
  n.v_x = s.v_x + (frx - ffy * std::sin(s.steer) + k.m * s.v_y * s.omega) / k.m * ts;
  n.v_y = s.v_y + (fry + ffy * std::cos(s.steer) - k.m * s.v_x * s.omega) / k.m * ts;
  n.omega = s.omega + (ffy * k.l_f * std::cos(s.steer) - fry * k.l_r) / c[kIz] * ts;
  n.throttle = std::clamp(s.throttle + u.dthrottle, 0.0, 1.0);
  n.steer = std::clamp(s.steer + u.dsteer, -lim.steer_max, lim.steer_max);
  return n;
}

}  // namespace

TEST_CASE("slip angles: straight symmetric zero case") {
  VelocityState s;
  s.v_x = 1.7;
  const auto slip = slip_angles(s, test_known(), test_coeffs());
  CHECK(slip.alpha_f == 0.0);
  CHECK(slip.alpha_r == 0.0);
}

TEST_CASE("slip angles: direct formula evaluation") {
  VelocityState s;
  s.v_x = 1.0;
  s.v_y = 0.1;
  s.omega = 0.5;
  s.steer = 0.05;
  const auto slip = slip_angles(s, test_known(), test_coeffs());
  CHECK(slip.alpha_f == doctest::Approx(0.05 - std::atan(0.5 * 0.029 + 0.1)).epsilon(1e-12));
  CHECK(slip.alpha_r == doctest::Approx(std::atan(0.5 * 0.033 - 0.1)).epsilon(1e-12));
}

TEST_CASE("slip angles: G offset passes through") {
  VelocityState s;
  s.v_x = 2.0;
  auto c = test_coeffs();
  c[kGf] = 0.01;
  const auto slip = slip_angles(s, test_known(), c);
  CHECK(slip.alpha_f == 0.01);
  CHECK(slip.alpha_r == 0.0);
}

TEST_CASE("slip angles: domain error below the floor") {
  VelocityState s;
  s.v_x = 0.01;
  CHECK_THROWS_AS(slip_angles(s, test_known(), test_coeffs()), std::domain_error);
  s.v_x = -1.0;
  CHECK_THROWS_AS(slip_angles(s, test_known(), test_coeffs()), std::domain_error);
}

TEST_CASE("pacejka: zero slip with zero offset gives zero force") {
  CHECK(pacejka_force(0.0, 5.0, 1.5, 0.2, -0.5, 0.0) == 0.0);
}

TEST_CASE("pacejka: nested formula hand evaluation") {
  const double b = 5.579, c = 1.2, d = 0.192, e = -0.083, alpha = 0.1;
  const double s = b * alpha;
  const double expected = d * std::sin(c * std::atan(s - e * (s - std::atan(s))));
  CHECK(pacejka_force(alpha, b, c, d, e, 0.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("pacejka: force saturation |F - K| <= |D| for any slip") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double alpha = rng.uniform(-50.0, 50.0);
    const double b = rng.uniform(1.0, 40.0);
    const double c = rng.uniform(0.3, 2.5);
    const double d = rng.uniform(0.01, 5000.0);
    const double e = rng.uniform(-3.0, 1.0);
    const double k = rng.uniform(-200.0, 200.0);
    const double f = pacejka_force(alpha, b, c, d, e, k);
    CHECK(std::abs(f - k) <= std::abs(d) + 1e-12);
  }
}

TEST_CASE("drivetrain force: closed-form cases") {
  auto c = test_coeffs();
  VelocityState s;
  s.v_x = 0.0;
  s.throttle = 0.0;
  CHECK(drivetrain_force(s, c) == -c[kCr0]);
  s.throttle = 1.0;
  CHECK(drivetrain_force(s, c) == c[kCm1] - c[kCr0]);

  c[kCm1] = 1000.0;
  c[kCm2] = 0.5;
  c[kCr0] = 0.7;
  c[kCd] = 0.4;
  s.throttle = 0.5;
  s.v_x = 2.0;
  CHECK(drivetrain_force(s, c) == doctest::Approx(497.2).epsilon(1e-14));
}

TEST_CASE("step_velocity: force-free coasting leaves velocities unchanged") {
  UnknownCoefficients zero;
  zero[kIz] = 1e-5;  // any positive inertia
  VelocityState s;
  s.v_x = 1.0;
  s.v_y = 0.1;
  s.throttle = 0.5;
  s.steer = 0.05;
  const ControlInput u{0.01, -0.002};
  const auto n = step_velocity(s, u, test_known(), zero, 0.02, {});
  CHECK(n.v_x == s.v_x);
  CHECK(n.v_y == s.v_y);
  CHECK(n.omega == 0.0);
  CHECK(n.throttle == doctest::Approx(0.51).epsilon(1e-15));
  CHECK(n.steer == doctest::Approx(0.048).epsilon(1e-15));
}

TEST_CASE("step_velocity: single step matches the scalar oracle") {
  VelocityState s;
  s.v_x = 1.5;
  s.v_y = 0.05;
  s.omega = 0.8;
  s.throttle = 0.4;
  s.steer = 0.1;
  const ControlInput u{0.02, 0.005};
  const ActuatorLimits lim;
  const auto got = step_velocity(s, u, test_known(), test_coeffs(), 0.02, lim);
  const auto want = oracle_step(s, u, test_known(), test_coeffs(), 0.02, lim);
  CHECK(got.v_x == doctest::Approx(want.v_x).epsilon(1e-14));
  CHECK(got.v_y == doctest::Approx(want.v_y).epsilon(1e-14));
  CHECK(got.omega == doctest::Approx(want.omega).epsilon(1e-14));
  CHECK(got.throttle == want.throttle);
  CHECK(got.steer == want.steer);
}

TEST_CASE("step_velocity: random states match the scalar oracle") {
  Rng rng(23);
  const ActuatorLimits lim;
  for (int i = 0; i < 500; ++i) {
    const auto s = random_state(rng);
    const auto c = random_coeffs(rng);
    const ControlInput u{rng.uniform(-0.05, 0.05), rng.uniform(-0.02, 0.02)};
    const auto got = step_velocity(s, u, test_known(), c, 0.02, lim);
    const auto want = oracle_step(s, u, test_known(), c, 0.02, lim);
    CHECK(got.v_x == doctest::Approx(want.v_x).epsilon(1e-12));
    CHECK(got.v_y == doctest::Approx(want.v_y).epsilon(1e-12));
    CHECK(got.omega == doctest::Approx(want.omega).epsilon(1e-12));
  }
}

TEST_CASE("step_velocity: deterministic across calls") {
  Rng rng(5);
  const auto s = random_state(rng);
  const auto c = random_coeffs(rng);
  const ControlInput u{0.01, 0.002};
  const auto a = step_velocity(s, u, test_known(), c, 0.02, {});
  const auto b = step_velocity(s, u, test_known(), c, 0.02, {});
  CHECK(a.v_x == b.v_x);
  CHECK(a.v_y == b.v_y);
  CHECK(a.omega == b.omega);
}

TEST_CASE("slip antisymmetry with zero offsets") {
  Rng rng(29);
  auto c = test_coeffs();
  c[kGf] = c[kGr] = c[kKf] = c[kKr] = 0.0;
  for (int i = 0; i < 200; ++i) {
    auto s = random_state(rng);
    auto m = s;
    m.v_y = -s.v_y;
    m.omega = -s.omega;
    m.steer = -s.steer;
    const auto slip_p = slip_angles(s, test_known(), c);
    const auto slip_m = slip_angles(m, test_known(), c);
    CHECK(slip_m.alpha_f == doctest::Approx(-slip_p.alpha_f).epsilon(1e-13));
    CHECK(slip_m.alpha_r == doctest::Approx(-slip_p.alpha_r).epsilon(1e-13));
    const auto f_p = lateral_tire_forces(slip_p, c);
    const auto f_m = lateral_tire_forces(slip_m, c);
    CHECK(f_m.f_fy == doctest::Approx(-f_p.f_fy).epsilon(1e-12));
    CHECK(f_m.f_ry == doctest::Approx(-f_p.f_ry).epsilon(1e-12));
  }
}

TEST_CASE("euler consistency: halved steps converge at order >= 1.9") {
  Rng rng(31);
  const auto c = test_coeffs();
  const ControlInput zero;
  VelocityState s;
  s.v_x = 2.0;
  s.v_y = 0.02;
  s.omega = 0.5;
  s.throttle = 0.3;
  s.steer = 0.05;

  auto err_at = [&](double ts) {
    const auto full = step_velocity(s, zero, test_known(), c, ts, {});
    auto half = step_velocity(s, zero, test_known(), c, ts / 2.0, {});
    half = step_velocity(half, zero, test_known(), c, ts / 2.0, {});
    return std::sqrt(std::pow(full.v_x - half.v_x, 2) + std::pow(full.v_y - half.v_y, 2) +
                     std::pow(full.omega - half.omega, 2));
  };

  const double e1 = err_at(0.004);
  const double e2 = err_at(0.002);
  const double e3 = err_at(0.001);
  CHECK(std::log2(e1 / e2) >= 1.9);
  CHECK(std::log2(e2 / e3) >= 1.9);
}

TEST_CASE("step_pose: axis-aligned and rotated motion") {
  VelocityState s;
  s.v_x = 1.0;
  PoseState p;
  auto n = step_pose(p, s, 0.02);
  CHECK(n.x == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(n.y == 0.0);
  CHECK(n.theta == 0.0);

  p.theta = M_PI / 2.0;
  n = step_pose(p, s, 0.02);
  CHECK(n.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(n.y == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("step_pose: generic values match the scalar expressions") {
  PoseState p{0.3, -0.8, 0.7};
  VelocityState s;
  s.v_x = 1.7;
  s.v_y = -0.2;
  s.omega = 2.1;
  const double ts = 0.02;
  const auto n = step_pose(p, s, ts);
  CHECK(n.x == doctest::Approx(0.3 + (1.7 * std::cos(0.7) + 0.2 * std::sin(0.7)) * ts).epsilon(1e-14));
  CHECK(n.y == doctest::Approx(-0.8 + (1.7 * std::sin(0.7) - 0.2 * std::cos(0.7)) * ts).epsilon(1e-14));
  CHECK(n.theta == doctest::Approx(0.7 + 2.1 * ts).epsilon(1e-14));
}

TEST_CASE("step_pose: theta stays wrapped") {
  PoseState p{0.0, 0.0, 3.14};
  VelocityState s;
  s.omega = 1.0;
  const auto n = step_pose(p, s, 0.02);
  CHECK(n.theta <= M_PI);
  CHECK(n.theta > -M_PI);
  CHECK(n.theta == doctest::Approx(3.16 - 2.0 * M_PI).epsilon(1e-12));
}

TEST_CASE("velocity step VJP matches central finite differences") {
  Rng rng(37);
  const KnownCoefficients known = test_known();
  const ActuatorLimits lim;
  const double ts = 0.02;

  for (int trial = 0; trial < 60; ++trial) {
    const auto s = random_state(rng);
    const auto c = random_coeffs(rng);
    const ControlInput u{rng.uniform(-0.04, 0.04), rng.uniform(-0.015, 0.015)};
    const bool fixed_frx = trial % 3 == 0;
    const double frx = rng.uniform(-0.1, 0.3);

    std::array<double, 5> adj{};
    for (auto& a : adj) a = rng.uniform(-1.0, 1.0);

    const auto cache = fixed_frx
                           ? step_velocity_record_fixed_frx(s, u, known, c, frx, ts, lim)
                           : step_velocity_record(s, u, known, c, ts, lim);
    if (cache.throttle_clamped || cache.steer_clamped) continue;  // kinked point
    const auto got = step_velocity_vjp(cache, adj);

    auto dot_next = [&](const VelocityState& n) {
      return adj[0] * n.v_x + adj[1] * n.v_y + adj[2] * n.omega + adj[3] * n.throttle +
             adj[4] * n.steer;
    };
    auto eval = [&](const VelocityState& s2, const ControlInput& u2,
                    const UnknownCoefficients& c2, double frx2) {
      const auto cc = fixed_frx ? step_velocity_record_fixed_frx(s2, u2, known, c2, frx2, ts, lim)
                                : step_velocity_record(s2, u2, known, c2, ts, lim);
      return dot_next(cc.next);
    };

    // step relative to the perturbed value, to stay accurate on tiny
    // magnitudes like I_z
    auto fd_check = [&](double analytic, double base, auto perturb) {
      const double h = 1e-5 * std::max(std::abs(base), 1e-3);
      const double plus = perturb(h);
      const double minus = perturb(-h);
      const double fd = (plus - minus) / (2.0 * h);
      const double scale = std::max({1e-4, std::abs(fd), std::abs(analytic)});
      CHECK(std::abs(analytic - fd) / scale < 2e-5);
    };

    // state entries
    const std::array<double, 5> state_vals = {s.v_x, s.v_y, s.omega, s.throttle, s.steer};
    for (int k = 0; k < 5; ++k) {
      fd_check(got.state[static_cast<std::size_t>(k)], state_vals[static_cast<std::size_t>(k)],
               [&](double d) {
                 auto s2 = s;
                 switch (k) {
                   case 0: s2.v_x += d; break;
                   case 1: s2.v_y += d; break;
                   case 2: s2.omega += d; break;
                   case 3: s2.throttle += d; break;
                   case 4: s2.steer += d; break;
                 }
                 return eval(s2, u, c, frx);
               });
    }
    // input entries
    fd_check(got.input[0], u.dthrottle,
             [&](double d) { return eval(s, {u.dthrottle + d, u.dsteer}, c, frx); });
    fd_check(got.input[1], u.dsteer,
             [&](double d) { return eval(s, {u.dthrottle, u.dsteer + d}, c, frx); });
    // coefficient entries
    for (int k = 0; k < kNumCoef; ++k) {
      if (fixed_frx && (k == kCm1 || k == kCm2 || k == kCr0 || k == kCd)) {
        CHECK(got.coeffs[static_cast<std::size_t>(k)] == 0.0);
        continue;
      }
      fd_check(got.coeffs[static_cast<std::size_t>(k)], c[k], [&](double d) {
        auto c2 = c;
        c2[k] += d;
        return eval(s, u, c2, frx);
      });
    }
    if (fixed_frx) {
      fd_check(got.frx, frx, [&](double d) { return eval(s, u, c, frx + d); });
    }
  }
}

TEST_CASE("pose step VJP matches central finite differences") {
  Rng rng(43);
  const double ts = 0.02;
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    PoseState p{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-3.0, 3.0)};
    auto s = random_state(rng);
    std::array<double, 3> adj{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0)};
    const auto got = step_pose_vjp(p, s, ts, adj);

    auto eval = [&](const PoseState& p2, const VelocityState& s2) {
      const auto n = step_pose(p2, s2, ts);
      return adj[0] * n.x + adj[1] * n.y + adj[2] * n.theta;
    };
    auto fd = [&](auto perturb) { return (perturb(h) - perturb(-h)) / (2.0 * h); };

    CHECK(got.pose[0] == doctest::Approx(fd([&](double d) {
            auto p2 = p;
            p2.x += d;
            return eval(p2, s);
          })).epsilon(1e-5));
    CHECK(got.pose[1] == doctest::Approx(fd([&](double d) {
            auto p2 = p;
            p2.y += d;
            return eval(p2, s);
          })).epsilon(1e-5));
    CHECK(got.pose[2] == doctest::Approx(fd([&](double d) {
            auto p2 = p;
            p2.theta += d;
            return eval(p2, s);
          })).epsilon(1e-5));
    CHECK(got.velocity[0] == doctest::Approx(fd([&](double d) {
            auto s2 = s;
            s2.v_x += d;
            return eval(p, s2);
          })).epsilon(1e-5));
    CHECK(got.velocity[1] == doctest::Approx(fd([&](double d) {
            auto s2 = s;
            s2.v_y += d;
            return eval(p, s2);
          })).epsilon(1e-5));
    CHECK(got.velocity[2] == doctest::Approx(fd([&](double d) {
            auto s2 = s;
            s2.omega += d;
            return eval(p, s2);
          })).epsilon(1e-5));
  }
}
