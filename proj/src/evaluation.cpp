#include "vdlab/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "vdlab/dynamics.hpp"
#include "vdlab/train.hpp"

namespace vdlab {

namespace {

// A model with no direct-force head never reports drivetrain estimates as
// absent; the DPM never estimates G/K, the drivetrain entries or I_z.
bool dpm_estimates(int coef) {
  for (int c : kDpmCoefMap)
    if (c == coef) return true;
  return false;
}

}  // namespace

OneStepMetrics one_step_metrics(const Estimator& estimator, const Dataset& dataset, int tau,
                                const PhysicsContext& physics, bool parallel) {
  const WindowSet ws = build_windows(dataset, tau, kVxFloor);
  if (ws.size() == 0) throw std::invalid_argument("one_step_metrics: dataset yields no windows");

  const std::size_t n = ws.size();
  std::vector<std::vector<double>> sq(n);   // per-window squared errors
  std::vector<std::array<double, 3>> abs_err(n);

  const auto body = [&](std::size_t i) {
    const int start = ws.starts[i];
    const ModelOutput est = estimator.estimate(dataset, start);
    const auto& last = dataset.rows[static_cast<std::size_t>(start + tau)];
    const auto& target = dataset.rows[static_cast<std::size_t>(start + tau + 1)];
    const VelocityState pred = predict_next(last.vel, last.input, physics, est);
    const double e0 = pred.v_x - target.vel.v_x;
    const double e1 = pred.v_y - target.vel.v_y;
    const double e2 = pred.omega - target.vel.omega;
    sq[i] = {e0 * e0, e1 * e1, e2 * e2};
    abs_err[i] = {std::abs(e0), std::abs(e1), std::abs(e2)};
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }

  std::vector<double> sums;
  tree_reduce_sum_vectors(sq, n, sums);

  OneStepMetrics m;
  m.n_windows = static_cast<int>(n);
  const double inv = 1.0 / static_cast<double>(n);
  m.v_x.rmse = std::sqrt(sums[0] * inv);
  m.v_y.rmse = std::sqrt(sums[1] * inv);
  m.omega.rmse = std::sqrt(sums[2] * inv);
  for (std::size_t i = 0; i < n; ++i) {
    m.v_x.emax = std::max(m.v_x.emax, abs_err[i][0]);
    m.v_y.emax = std::max(m.v_y.emax, abs_err[i][1]);
    m.omega.emax = std::max(m.omega.emax, abs_err[i][2]);
  }
  return m;
}

HorizonMetrics horizon_rollout_metrics(const Estimator& estimator, const Dataset& dataset, int tau,
                                       const PhysicsContext& physics, double horizon_s,
                                       bool parallel) {
  const double steps_exact = horizon_s / physics.ts;
  const int steps = static_cast<int>(std::lround(steps_exact));
  if (steps < 1 || std::abs(steps_exact - steps) > 1e-9) {
    throw std::invalid_argument("horizon_rollout_metrics: horizon not divisible by ts");
  }

  const WindowSet ws = build_windows(dataset, tau, kVxFloor);
  const int n_rows = static_cast<int>(dataset.rows.size());

  // A start is usable when the rollout stays inside one session.
  std::vector<int> starts;
  int skipped = 0;
  for (const int s : ws.starts) {
    const int lead = s + tau;  // prediction starts here
    if (lead + steps >= n_rows) {
      ++skipped;
      continue;
    }
    const int session = dataset.rows[static_cast<std::size_t>(lead)].session;
    if (dataset.rows[static_cast<std::size_t>(lead + steps)].session != session) {
      ++skipped;
      continue;
    }
    starts.push_back(s);
  }
  if (starts.empty()) throw std::invalid_argument("horizon_rollout_metrics: no usable starts");

  const std::size_t n = starts.size();
  std::vector<std::vector<double>> err(n);  // per start: {sum displacement, final displacement}

  const auto body = [&](std::size_t i) {
    const int s = starts[i];
    const int lead = s + tau;
    const ModelOutput est = estimator.estimate(dataset, s);

    VelocityState pred_vel = dataset.rows[static_cast<std::size_t>(lead)].vel;
    PoseState pred_pose = dataset.rows[static_cast<std::size_t>(lead)].pose;
    PoseState truth_pose = pred_pose;

    double sum_disp = 0.0;
    double final_disp = 0.0;
    for (int k = 0; k < steps; ++k) {
      const auto& row = dataset.rows[static_cast<std::size_t>(lead + k)];
      // predicted branch: estimated coefficients, recorded control inputs
      pred_pose = step_pose(pred_pose, pred_vel, physics.ts);
      pred_vel = est.has_frx
                     ? step_velocity_record_fixed_frx(pred_vel, row.input, physics.known,
                                                      est.coeffs, est.frx, physics.ts,
                                                      physics.limits)
                           .next
                     : step_velocity(pred_vel, row.input, physics.known, est.coeffs, physics.ts,
                                     physics.limits);
      // truth branch: pose rollout of the recorded states
      truth_pose = step_pose(truth_pose, row.vel, physics.ts);
      const double d = std::hypot(pred_pose.x - truth_pose.x, pred_pose.y - truth_pose.y);
      sum_disp += d;
      final_disp = d;
    }
    err[i] = {sum_disp / steps, final_disp};
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }

  std::vector<double> sums;
  tree_reduce_sum_vectors(err, n, sums);

  HorizonMetrics m;
  m.n_starts = static_cast<int>(n);
  m.n_skipped = skipped;
  m.ade = sums[0] / static_cast<double>(n);
  m.fde = sums[1] / static_cast<double>(n);
  return m;
}

OpenLoopReport open_loop_report(const Estimator& estimator, const Dataset& dataset, int tau,
                                const PhysicsContext& physics, double horizon_s, bool parallel) {
  const OneStepMetrics one = one_step_metrics(estimator, dataset, tau, physics, parallel);
  const HorizonMetrics hor =
      horizon_rollout_metrics(estimator, dataset, tau, physics, horizon_s, parallel);
  OpenLoopReport r;
  r.v_x = one.v_x;
  r.v_y = one.v_y;
  r.omega = one.omega;
  r.n_windows = one.n_windows;
  r.ade = hor.ade;
  r.fde = hor.fde;
  r.horizon_s = horizon_s;
  r.n_starts = hor.n_starts;
  r.n_skipped = hor.n_skipped;
  return r;
}

CoefficientReport coefficient_report(const Estimator& estimator, const Dataset& dataset, int tau,
                                     const CoefficientBounds& bounds,
                                     const std::optional<UnknownCoefficients>& ground_truth) {
  const WindowSet ws = build_windows(dataset, tau, kVxFloor);
  if (ws.size() == 0) throw std::invalid_argument("coefficient_report: dataset yields no windows");

  const bool dpm = !estimator.is_fixed() && is_dpm(estimator.checkpoint().kind);

  const std::size_t n = ws.size();
  std::vector<std::vector<double>> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ModelOutput est = estimator.estimate(dataset, ws.starts[i]);
    acc[i].assign(kNumCoef + 1, 0.0);
    for (int c = 0; c < kNumCoef; ++c) acc[i][static_cast<std::size_t>(c)] = est.coeffs[c];
    acc[i][kNumCoef] = est.frx;
  }
  std::vector<double> sums;
  tree_reduce_sum_vectors(acc, n, sums);
  const double inv = 1.0 / static_cast<double>(n);

  CoefficientReport report;
  report.n_windows = static_cast<int>(n);
  for (int c = 0; c < kNumCoef; ++c) {
    const auto u = static_cast<std::size_t>(c);
    CoefficientEntry& e = report.entries[u];
    e.lower = bounds.lower[u];
    e.upper = bounds.upper[u];
    if (ground_truth) e.ground_truth = (*ground_truth)[c];
    const bool estimated = dpm ? dpm_estimates(c) : true;
    if (estimated) {
      e.mean = sums[u] * inv;
      e.in_range = *e.mean >= e.lower && *e.mean <= e.upper;
    }
    if (dpm && c == kIz) e.ground_truth.reset();  // rendered as NA: the value is assumed, not estimated
  }
  if (dpm) report.frx_mean = sums[kNumCoef] * inv;
  return report;
}

std::string open_loop_report_to_json(const OpenLoopReport& report) {
  nlohmann::json j;
  auto chan = [](const ChannelMetrics& m) {
    return nlohmann::json{{"rmse", m.rmse}, {"emax", m.emax}};
  };
  j["v_x"] = chan(report.v_x);
  j["v_y"] = chan(report.v_y);
  j["omega"] = chan(report.omega);
  j["ade"] = report.ade;
  j["fde"] = report.fde;
  j["horizon_s"] = report.horizon_s;
  j["n_windows"] = report.n_windows;
  j["n_starts"] = report.n_starts;
  j["n_skipped"] = report.n_skipped;
  return j.dump(2);
}

std::string coefficient_report_to_json(const CoefficientReport& report) {
  nlohmann::json j;
  for (int c = 0; c < kNumCoef; ++c) {
    const auto u = static_cast<std::size_t>(c);
    const CoefficientEntry& e = report.entries[u];
    nlohmann::json entry;
    entry["mean"] = e.mean ? nlohmann::json(*e.mean) : nlohmann::json(nullptr);
    entry["lower"] = e.lower;
    entry["upper"] = e.upper;
    entry["ground_truth"] = e.ground_truth ? nlohmann::json(*e.ground_truth) : nlohmann::json(nullptr);
    entry["in_range"] = e.in_range ? nlohmann::json(*e.in_range) : nlohmann::json(nullptr);
    j[std::string(kCoefNames[u])] = entry;
  }
  j["F_rx_mean"] = report.frx_mean ? nlohmann::json(*report.frx_mean) : nlohmann::json(nullptr);
  j["n_windows"] = report.n_windows;
  return j.dump(2);
}

}  // namespace vdlab
