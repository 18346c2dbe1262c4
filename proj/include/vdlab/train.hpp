#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vdlab/model.hpp"

namespace vdlab {

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // -1: initial parameters were never beaten
  double best_val_loss = 0.0;
  std::array<double, kNumCoef> val_coeff_mean{};  // mean estimates, best params
  double val_frx_mean = 0.0;                      // DPM only
  bool diverged = false;
  int n_train_windows = 0;
  int n_val_windows = 0;
};

std::string training_report_to_json(const TrainingReport& report);

// Fixed pairwise tree reduction; both the serial and the OpenMP batch paths
// reduce per-window results in this order, so results do not depend on the
// thread count.
double tree_reduce_sum(std::span<double> values);
void tree_reduce_sum_vectors(std::vector<std::vector<double>>& vecs, std::size_t count,
                             std::vector<double>& out);

// Loss and parameter gradient of one window (full chain: loss -> dynamics ->
// guard -> network). grad accumulates.
double window_loss_grad(const Checkpoint& ckpt, const PhysicsContext& physics,
                        const Dataset& dataset, int start, std::vector<double>& grad,
                        NetworkCache& cache);

// Loss only (no gradient).
double window_loss(const Checkpoint& ckpt, const PhysicsContext& physics, const Dataset& dataset,
                   int start, NetworkCache& cache);

// Reusable buffers for batch evaluation.
struct BatchWorkspace {
  std::vector<std::vector<double>> grads;   // per-window gradients
  std::vector<double> losses;               // per-window losses
  std::vector<NetworkCache> caches;         // one per thread
  void prepare(std::size_t batch, std::size_t params);
};

// Mean loss and mean gradient over the batch. The OpenMP kernel and the
// serial reference share this entry point; results are bit-identical.
double batch_loss_grad(const Checkpoint& ckpt, const PhysicsContext& physics,
                       const WindowSet& windows, std::span<const int> batch,
                       BatchWorkspace& workspace, std::vector<double>& grad_out, bool parallel);

double batch_loss_grad_serial(const Checkpoint& ckpt, const PhysicsContext& physics,
                              const WindowSet& windows, std::span<const int> batch,
                              BatchWorkspace& workspace, std::vector<double>& grad_out);

// Mean loss over a window set (validation); same reduction scheme.
double mean_loss(const Checkpoint& ckpt, const PhysicsContext& physics, const WindowSet& windows,
                 BatchWorkspace& workspace, bool parallel);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void update(std::vector<double>& params, const std::vector<double>& grad, double lr,
              double beta1, double beta2, double epsilon);
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainingReport report;
};

// Trains a model of the given kind on the dataset. fixed_iz is consumed by
// the DPM variants only.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const CoefficientBounds& bounds,
                  ModelKind kind, const PhysicsContext& physics, double fixed_iz = 0.0);

}  // namespace vdlab
