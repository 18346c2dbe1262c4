#pragma once

#include <optional>
#include <string>

#include "vdlab/model.hpp"

namespace vdlab {

struct ChannelMetrics {
  double rmse = 0.0;
  double emax = 0.0;
};

struct OpenLoopReport {
  ChannelMetrics v_x, v_y, omega;
  double ade = 0.0;
  double fde = 0.0;
  double horizon_s = 0.0;
  int n_windows = 0;       // one-step windows scored
  int n_starts = 0;        // horizon rollouts scored
  int n_skipped = 0;       // horizon rollouts crossing a session boundary
};

// One-step prediction error over every window of the dataset.
struct OneStepMetrics {
  ChannelMetrics v_x, v_y, omega;
  int n_windows = 0;
};

OneStepMetrics one_step_metrics(const Estimator& estimator, const Dataset& dataset, int tau,
                                const PhysicsContext& physics, bool parallel = true);

struct HorizonMetrics {
  double ade = 0.0;
  double fde = 0.0;
  int n_starts = 0;
  int n_skipped = 0;
};

// Coefficients are estimated once per start window and held constant across
// the rollout; predicted positions are compared against a pose rollout of
// the recorded states.
HorizonMetrics horizon_rollout_metrics(const Estimator& estimator, const Dataset& dataset, int tau,
                                       const PhysicsContext& physics, double horizon_s,
                                       bool parallel = true);

OpenLoopReport open_loop_report(const Estimator& estimator, const Dataset& dataset, int tau,
                                const PhysicsContext& physics, double horizon_s,
                                bool parallel = true);

struct CoefficientEntry {
  std::optional<double> mean;          // absent when the model never estimates it
  double lower = 0.0, upper = 0.0;
  std::optional<double> ground_truth;
  std::optional<bool> in_range;
};

struct CoefficientReport {
  std::array<CoefficientEntry, kNumCoef> entries;
  std::optional<double> frx_mean;  // DPM direct-force head
  int n_windows = 0;
};

CoefficientReport coefficient_report(const Estimator& estimator, const Dataset& dataset, int tau,
                                     const CoefficientBounds& bounds,
                                     const std::optional<UnknownCoefficients>& ground_truth);

std::string open_loop_report_to_json(const OpenLoopReport& report);
std::string coefficient_report_to_json(const CoefficientReport& report);

}  // namespace vdlab
