#include "vdlab/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "vdlab/dynamics.hpp"

namespace vdlab {

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("MpcConfig: horizon must be >= 1");
  if (iterations < 0) throw std::invalid_argument("MpcConfig: iterations must be >= 0");
  if (!(step_size > 0.0)) throw std::invalid_argument("MpcConfig: step_size must be positive");
  auto check2x2 = [](const std::array<double, 4>& m, bool strict, const char* name) {
    if (std::abs(m[1] - m[2]) > 1e-12) {
      throw std::invalid_argument(std::string("MpcConfig: ") + name + " must be symmetric");
    }
    // 2x2 eigenvalues: both nonnegative iff trace >= 0 and det >= 0
    const double det = m[0] * m[3] - m[1] * m[2];
    const double tr = m[0] + m[3];
    if (strict ? !(det > 0.0 && tr > 0.0) : !(det >= 0.0 && tr >= 0.0)) {
      throw std::invalid_argument(std::string("MpcConfig: ") + name +
                                  (strict ? " must be positive definite" : " must be PSD"));
    }
  };
  check2x2(q, false, "Q");
  check2x2(r, true, "R");
}

std::vector<Vec2> reference_points(const PolylinePath& raceline, const PoseState& pose,
                                   double preview_speed, int horizon, double ts) {
  if (raceline.points().size() < 2) {
    throw std::invalid_argument("reference_points: degenerate raceline");
  }
  const auto proj = raceline.project({pose.x, pose.y});
  std::vector<Vec2> refs;
  refs.reserve(static_cast<std::size_t>(horizon));
  for (int h = 1; h <= horizon; ++h) {
    refs.push_back(raceline.point_at(proj.s + preview_speed * ts * h));
  }
  return refs;
}

namespace {

ControlInput clamp_control(const ControlInput& u, const ActuatorLimits& lim) {
  return {std::clamp(u.dthrottle, -lim.dthrottle_max, lim.dthrottle_max),
          std::clamp(u.dsteer, -lim.dsteer_max, lim.dsteer_max)};
}

struct Rollout {
  std::vector<PoseState> poses;               // size H+1
  std::vector<VelocityState> vels;            // size H+1
  std::vector<VelocityStepCache> caches;      // size H
  double cost = 0.0;
  bool feasible = true;
};

// pose[h+1] = step_pose(pose[h], vel[h]); vel[h+1] = step_velocity(vel[h], u[h]).
Rollout roll(const MpcProblem& p, std::span<const ControlInput> u, bool record) {
  const int h_max = p.config.horizon;
  Rollout r;
  r.poses.reserve(static_cast<std::size_t>(h_max) + 1);
  r.vels.reserve(static_cast<std::size_t>(h_max) + 1);
  if (record) r.caches.reserve(static_cast<std::size_t>(h_max));
  r.poses.push_back(p.start_pose);
  r.vels.push_back(p.start_state);

  double cost = 0.0;
  for (int h = 0; h < h_max; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    cost += p.config.r[0] * u[uh].dthrottle * u[uh].dthrottle +
            2.0 * p.config.r[1] * u[uh].dthrottle * u[uh].dsteer +
            p.config.r[3] * u[uh].dsteer * u[uh].dsteer;

    const PoseState next_pose = step_pose(r.poses.back(), r.vels.back(), p.physics.ts);
    VelocityStepCache cache;
    try {
      cache = p.has_frx
                  ? step_velocity_record_fixed_frx(r.vels.back(), u[uh], p.physics.known, p.coeffs,
                                                   p.frx_fixed, p.physics.ts, p.physics.limits)
                  : step_velocity_record(r.vels.back(), u[uh], p.physics.known, p.coeffs,
                                         p.physics.ts, p.physics.limits);
    } catch (const std::domain_error&) {
      r.feasible = false;  // dropped below the v_x floor; candidate rejected
      r.cost = std::numeric_limits<double>::infinity();
      return r;
    }
    if (!std::isfinite(cache.next.v_x) || !std::isfinite(cache.next.v_y) ||
        !std::isfinite(cache.next.omega)) {
      r.feasible = false;
      r.cost = std::numeric_limits<double>::infinity();
      return r;
    }

    r.poses.push_back(next_pose);
    r.vels.push_back(cache.next);
    if (record) r.caches.push_back(std::move(cache));

    const Vec2& ref = p.refs[uh];
    const double ex = next_pose.x - ref.x;
    const double ey = next_pose.y - ref.y;
    cost += p.config.q[0] * ex * ex + 2.0 * p.config.q[1] * ex * ey + p.config.q[3] * ey * ey;
  }
  r.cost = cost;
  return r;
}

}  // namespace

double rollout_cost(const MpcProblem& problem, std::span<const ControlInput> controls) {
  if (static_cast<int>(controls.size()) != problem.config.horizon) {
    throw std::invalid_argument("rollout_cost: controls length must equal the horizon");
  }
  if (static_cast<int>(problem.refs.size()) != problem.config.horizon) {
    throw std::invalid_argument("rollout_cost: refs length must equal the horizon");
  }
  return roll(problem, controls, false).cost;
}

double rollout_cost_grad(const MpcProblem& problem, std::span<const ControlInput> controls,
                         std::vector<std::array<double, 2>>& grad) {
  const int h_max = problem.config.horizon;
  const Rollout r = roll(problem, controls, true);
  if (!r.feasible) {
    throw std::domain_error("rollout_cost_grad: infeasible rollout has no gradient");
  }
  grad.assign(static_cast<std::size_t>(h_max), {0.0, 0.0});

  const auto& q = problem.config.q;
  const auto& rr = problem.config.r;

  // Adjoint of pose[H]; vel[H] carries no cost of its own.
  std::array<double, 3> adj_pose{};
  std::array<double, 5> adj_vel{};
  {
    const auto uh = static_cast<std::size_t>(h_max - 1);
    const double ex = r.poses.back().x - problem.refs[uh].x;
    const double ey = r.poses.back().y - problem.refs[uh].y;
    adj_pose[0] = 2.0 * (q[0] * ex + q[1] * ey);
    adj_pose[1] = 2.0 * (q[1] * ex + q[3] * ey);
  }

  for (int h = h_max - 1; h >= 0; --h) {
    const auto uh = static_cast<std::size_t>(h);
    const PoseStepAdjoint pa =
        step_pose_vjp(r.poses[uh], r.vels[uh], problem.physics.ts, adj_pose);
    const VelocityStepAdjoint va = step_velocity_vjp(r.caches[uh], adj_vel);

    grad[uh][0] = va.input[0] + 2.0 * (rr[0] * controls[uh].dthrottle + rr[1] * controls[uh].dsteer);
    grad[uh][1] = va.input[1] + 2.0 * (rr[1] * controls[uh].dthrottle + rr[3] * controls[uh].dsteer);

    adj_pose = pa.pose;
    if (h >= 1) {
      const double ex = r.poses[uh].x - problem.refs[uh - 1].x;
      const double ey = r.poses[uh].y - problem.refs[uh - 1].y;
      adj_pose[0] += 2.0 * (q[0] * ex + q[1] * ey);
      adj_pose[1] += 2.0 * (q[1] * ex + q[3] * ey);
    }
    adj_vel = va.state;
    adj_vel[0] += pa.velocity[0];
    adj_vel[1] += pa.velocity[1];
    adj_vel[2] += pa.velocity[2];
  }
  return r.cost;
}

MpcSolution solve(const MpcProblem& problem, std::span<const ControlInput> warm_start) {
  problem.config.validate();
  const int h_max = problem.config.horizon;
  if (static_cast<int>(problem.refs.size()) != h_max) {
    throw std::invalid_argument("solve: refs length must equal the horizon");
  }
  const ActuatorLimits& lim = problem.physics.limits;

  std::vector<ControlInput> u(static_cast<std::size_t>(h_max));
  for (int h = 0; h < h_max; ++h) {
    u[static_cast<std::size_t>(h)] =
        h < static_cast<int>(warm_start.size())
            ? clamp_control(warm_start[static_cast<std::size_t>(h)], lim)
            : ControlInput{};
  }

  MpcSolution sol;
  double cost = roll(problem, u, false).cost;
  if (!std::isfinite(cost)) {
    // The warm start dies inside the horizon; coast instead.
    for (auto& c : u) c = problem.optimize_throttle ? ControlInput{} : ControlInput{c.dthrottle, 0.0};
    cost = roll(problem, u, false).cost;
  }

  std::vector<std::array<double, 2>> grad;
  double step = problem.config.step_size;
  int used = 0;

  // Diagonal preconditioner from the actuation weights: the R term dominates
  // the curvature in each control, so unit steps start near Newton scale.
  const double pre_t = 1.0 / (2.0 * std::max(problem.config.r[0], 1e-8));
  const double pre_s = 1.0 / (2.0 * std::max(problem.config.r[3], 1e-8));

  for (int it = 0; it < problem.config.iterations && std::isfinite(cost); ++it) {
    rollout_cost_grad(problem, u, grad);
    bool finite = true;
    for (const auto& g : grad) {
      if (!std::isfinite(g[0]) || !std::isfinite(g[1])) {
        finite = false;
        break;
      }
    }
    if (!finite) {
      // Diagnostic fallback: zero controls are always representable.
      std::fill(u.begin(), u.end(), ControlInput{});
      cost = roll(problem, u, false).cost;
      sol.gradient_failure = true;
      used = it + 1;
      break;
    }
    if (!problem.optimize_throttle) {
      for (auto& g : grad) g[0] = 0.0;
    }

    bool improved = false;
    double improvement = 0.0;
    while (step > 1e-14) {
      std::vector<ControlInput> trial(u.size());
      for (std::size_t h = 0; h < u.size(); ++h) {
        trial[h] = clamp_control({u[h].dthrottle - step * pre_t * grad[h][0],
                                  u[h].dsteer - step * pre_s * grad[h][1]},
                                 lim);
      }
      const double trial_cost = roll(problem, trial, false).cost;
      if (trial_cost < cost) {
        improvement = cost - trial_cost;
        u = std::move(trial);
        cost = trial_cost;
        step *= 1.5;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    used = it + 1;
    if (!improved || improvement < problem.config.tolerance) break;
  }

  const Rollout final_roll = roll(problem, u, false);
  sol.controls = std::move(u);
  sol.predicted.resize(final_roll.poses.size());
  for (std::size_t i = 0; i < final_roll.poses.size(); ++i) {
    sol.predicted[i] = {final_roll.poses[i], final_roll.vels[i]};
  }
  sol.cost = final_roll.cost;
  sol.iterations_used = used;
  return sol;
}

RaceReport race(const Track& track, const Estimator& estimator,
                const UnknownCoefficients& sim_truth, const PhysicsContext& physics,
                const MpcConfig& config, const RaceOptions& options) {
  config.validate();
  const PolylinePath raceline(track.raceline);
  const PolylinePath centerline(track.centerline);
  const std::vector<double> profile = speed_profile(raceline, options.profile);

  const bool dpm_throttle =
      !estimator.is_fixed() && is_dpm(estimator.checkpoint().kind);

  RaceReport report;

  // Start on the raceline, heading along it, at hold throttle for v_x0.
  PoseState pose;
  const Vec2 start_pt = raceline.point_at(0.0);
  const Vec2 start_tan = raceline.tangent_at(0.0);
  pose.x = start_pt.x;
  pose.y = start_pt.y;
  pose.theta = std::atan2(start_tan.y, start_tan.x);

  VelocityState vel;
  vel.v_x = options.v_x0;
  const double denom = sim_truth.c_m1() - sim_truth.c_m2() * vel.v_x;
  vel.throttle = denom > 0.0 ? std::clamp((sim_truth.c_r0() + sim_truth.c_d() * vel.v_x * vel.v_x) /
                                              denom,
                                          0.0, 1.0)
                             : 0.0;

  // History of completed (state, control) pairs for the live estimator.
  const int tau = estimator.is_fixed() ? 0 : estimator.checkpoint().shape.tau;
  std::deque<std::pair<VelocityState, ControlInput>> history;
  for (int i = 0; i <= tau; ++i) history.emplace_back(vel, ControlInput{});

  std::vector<ControlInput> warm(static_cast<std::size_t>(config.horizon));
  // First warm start ramps the throttle so low-speed rollouts stay feasible.
  for (auto& w : warm) w.dthrottle = physics.limits.dthrottle_max;

  const double lap_length = raceline.length();
  double progress = 0.0;
  double prev_s = raceline.project({pose.x, pose.y}).s;
  double t = 0.0;
  const double t_max = options.t_max_per_lap * options.laps;
  int laps_done = 0;
  bool outside_prev = false;
  double pid_integral = 0.0;

  const int max_steps = static_cast<int>(std::ceil(t_max / physics.ts)) + 1;
  report.trace.reserve(static_cast<std::size_t>(max_steps));

  while (t < t_max) {
    // estimate from the last tau+1 completed pairs
    ModelOutput est;
    if (estimator.is_fixed()) {
      est = estimator.estimate_window({});
    } else {
      std::vector<double> features;
      features.reserve(history.size() * kFeaturesPerStep);
      for (const auto& [s, u] : history) {
        features.insert(features.end(),
                        {s.v_x, s.v_y, s.omega, s.throttle, s.steer, u.dthrottle, u.dsteer});
      }
      est = estimator.estimate_window(features);
    }

    const auto proj = raceline.project({pose.x, pose.y});
    const double v_preview = profile_at(raceline, profile, proj.s);

    MpcProblem problem;
    problem.start_pose = pose;
    problem.start_state = vel;
    problem.refs = reference_points(raceline, pose, v_preview, config.horizon, physics.ts);
    problem.coeffs = est.coeffs;
    problem.frx_fixed = est.frx;
    problem.has_frx = est.has_frx;
    problem.optimize_throttle = !dpm_throttle;
    problem.physics = physics;
    problem.config = config;

    if (dpm_throttle) {
      // Direct-force baselines cannot shape throttle through the rollout;
      // a PI controller tracks the preview speed instead.
      const double err = v_preview - vel.v_x;
      pid_integral = std::clamp(pid_integral + err * physics.ts, -1.0, 1.0);
      const double cmd = options.pid_kp * err + options.pid_ki * pid_integral;
      const double dthrottle =
          std::clamp(std::clamp(cmd, 0.0, 1.0) - vel.throttle, -physics.limits.dthrottle_max,
                     physics.limits.dthrottle_max);
      warm[0].dthrottle = dthrottle;
      for (std::size_t h = 1; h < warm.size(); ++h) warm[h].dthrottle = 0.0;
    }

    const MpcSolution sol = solve(problem, warm);
    const ControlInput u0 = sol.controls.front();

    // advance the ground-truth model
    const PoseState next_pose = step_pose(pose, vel, physics.ts);
    VelocityState next_vel;
    try {
      next_vel = step_velocity(vel, u0, physics.known, sim_truth, physics.ts, physics.limits);
    } catch (const std::domain_error&) {
      report.abort_reason = "spin-out: v_x hit the floor";
      break;
    }

    history.emplace_back(vel, u0);
    while (static_cast<int>(history.size()) > tau + 1) history.pop_front();

    pose = next_pose;
    vel = next_vel;
    t += physics.ts;

    // progress and violations
    const auto c_proj = centerline.project({pose.x, pose.y});
    const bool outside = std::abs(c_proj.lateral) > track.half_width;
    if (outside && !outside_prev) ++report.violations;
    outside_prev = outside;

    const auto r_proj = raceline.project({pose.x, pose.y});
    double ds = r_proj.s - prev_s;
    if (ds > lap_length / 2.0) ds -= lap_length;
    if (ds < -lap_length / 2.0) ds += lap_length;
    progress += ds;
    prev_s = r_proj.s;

    RaceTraceRow row;
    row.t = t;
    row.pose = pose;
    row.v_x = vel.v_x;
    row.cost = sol.cost;
    row.violation = outside;
    report.trace.push_back(row);

    while (laps_done < options.laps &&
           progress >= lap_length * static_cast<double>(laps_done + 1)) {
      ++laps_done;
      report.lap_times.push_back(t);  // cumulative stamp; converted below
    }
    if (laps_done >= options.laps) {
      report.completed = true;
      break;
    }

    // shift the previous solution one step for the next warm start
    for (std::size_t h = 0; h + 1 < sol.controls.size(); ++h) warm[h] = sol.controls[h + 1];
    if (!warm.empty()) warm.back() = ControlInput{};
  }

  if (!report.completed && report.abort_reason.empty()) {
    report.abort_reason = "time limit reached";
  }

  // lap_times currently hold cumulative stamps; convert to per-lap durations
  for (std::size_t i = report.lap_times.size(); i-- > 1;) {
    report.lap_times[i] -= report.lap_times[i - 1];
  }

  // distance traveled from the trace
  double travel = 0.0;
  for (std::size_t i = 1; i < report.trace.size(); ++i) {
    travel += std::hypot(report.trace[i].pose.x - report.trace[i - 1].pose.x,
                         report.trace[i].pose.y - report.trace[i - 1].pose.y);
  }
  report.avg_speed = t > 0.0 ? travel / t : 0.0;
  return report;
}

void save_race_trace_csv(const RaceReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_race_trace_csv: cannot open " + path);
  out << "t,x,y,theta,vx,cost,violation\n";
  char buf[256];
  for (const auto& row : report.trace) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n", row.t, row.pose.x,
                  row.pose.y, row.pose.theta, row.v_x, row.cost, row.violation ? 1 : 0);
    out << buf;
  }
}

std::string race_summary_to_json(const RaceReport& report) {
  nlohmann::json j;
  j["lap_times"] = report.lap_times;
  j["lap_time"] = report.lap_times.empty() ? nlohmann::json(nullptr)
                                           : nlohmann::json(report.lap_times.front());
  j["avg_speed"] = report.avg_speed;
  j["violations"] = report.violations;
  j["completed"] = report.completed;
  j["abort_reason"] = report.abort_reason;
  j["steps"] = report.trace.size();
  return j.dump(2);
}

}  // namespace vdlab
