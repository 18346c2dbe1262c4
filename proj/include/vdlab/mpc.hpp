#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vdlab/model.hpp"
#include "vdlab/track.hpp"

namespace vdlab {

struct MpcConfig {
  int horizon = 15;
  std::array<double, 4> q = {10.0, 0.0, 0.0, 10.0};  // 2x2 row-major, PSD
  std::array<double, 4> r = {1.0, 0.0, 0.0, 100.0};  // 2x2 row-major, PD
  int iterations = 50;
  double step_size = 1.0;     // initial line-search step, in preconditioned units
  double tolerance = 1e-12;   // absolute improvement stop
  void validate() const;      // throws on H < 1, asymmetric/indefinite Q or R
};

// One receding-horizon problem. Coefficients are frozen for the whole solve;
// the solver never re-queries the estimator inside the horizon.
struct MpcProblem {
  PoseState start_pose;
  VelocityState start_state;
  std::vector<Vec2> refs;  // size horizon; refs[h-1] pairs with the pose at step h
  UnknownCoefficients coeffs;
  double frx_fixed = 0.0;
  bool has_frx = false;            // direct-force baseline rollouts
  bool optimize_throttle = true;   // false: dthrottle frozen (PID throttle path)
  PhysicsContext physics;
  MpcConfig config;
};

struct MpcSolution {
  std::vector<ControlInput> controls;                       // size horizon
  std::vector<std::pair<PoseState, VelocityState>> predicted;  // size horizon+1
  double cost = 0.0;
  int iterations_used = 0;
  bool gradient_failure = false;  // fell back to the zero-control solution
};

// H raceline points ahead of the pose's arc-length projection, spaced by
// preview_speed * ts (constant-speed preview).
std::vector<Vec2> reference_points(const PolylinePath& raceline, const PoseState& pose,
                                   double preview_speed, int horizon, double ts);

// Tracking cost plus actuation cost of a candidate control sequence;
// +infinity when the rollout drops below the v_x floor.
double rollout_cost(const MpcProblem& problem, std::span<const ControlInput> controls);

// Cost and its gradient via a reverse sweep over the rollout. The controls
// must give a finite cost.
double rollout_cost_grad(const MpcProblem& problem, std::span<const ControlInput> controls,
                         std::vector<std::array<double, 2>>& grad);

// Projected gradient descent with a backtracking line search, started from
// the (clamped) warm start. Cost never increases.
MpcSolution solve(const MpcProblem& problem, std::span<const ControlInput> warm_start);

struct RaceOptions {
  int laps = 1;
  double v_x0 = 0.1;
  double t_max_per_lap = 60.0;
  double pid_kp = 0.8;  // PID throttle for direct-force baselines
  double pid_ki = 0.4;
  SpeedProfileParams profile;  // preview target speeds along the raceline
};

struct RaceTraceRow {
  double t = 0.0;
  PoseState pose;
  double v_x = 0.0;
  double cost = 0.0;
  bool violation = false;
};

struct RaceReport {
  std::vector<double> lap_times;
  double avg_speed = 0.0;  // distance traveled / elapsed time
  int violations = 0;      // boundary-crossing episodes
  bool completed = false;
  std::string abort_reason;
  std::vector<RaceTraceRow> trace;
};

// Closed loop at the simulation rate: estimate coefficients from the live
// history, solve, apply the first control, advance the ground-truth model.
RaceReport race(const Track& track, const Estimator& estimator,
                const UnknownCoefficients& sim_truth, const PhysicsContext& physics,
                const MpcConfig& config, const RaceOptions& options);

void save_race_trace_csv(const RaceReport& report, const std::string& path);
std::string race_summary_to_json(const RaceReport& report);

}  // namespace vdlab
