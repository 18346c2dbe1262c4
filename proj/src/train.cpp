#include "vdlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "vdlab/dynamics.hpp"
#include "vdlab/rng.hpp"

namespace vdlab {

namespace {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace

double tree_reduce_sum(std::span<double> values) {
  if (values.empty()) return 0.0;
  if (values.size() == 1) return values[0];
  const std::size_t mid = values.size() / 2;
  return tree_reduce_sum(values.subspan(0, mid)) + tree_reduce_sum(values.subspan(mid));
}

namespace {

// Pairwise in-place reduction over vecs[0..count): result lands in vecs[0].
void tree_reduce_range(std::vector<std::vector<double>>& vecs, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 1) return;
  const std::size_t mid = lo + (hi - lo) / 2;
  tree_reduce_range(vecs, lo, mid);
  tree_reduce_range(vecs, mid, hi);
  auto& a = vecs[lo];
  const auto& b = vecs[mid];
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

void tree_reduce_sum_vectors(std::vector<std::vector<double>>& vecs, std::size_t count,
                             std::vector<double>& out) {
  if (count == 0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  tree_reduce_range(vecs, 0, count);
  out = vecs[0];
}

void BatchWorkspace::prepare(std::size_t batch, std::size_t params) {
  if (grads.size() < batch) grads.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) grads[i].assign(params, 0.0);
  losses.assign(batch, 0.0);
  const auto threads = static_cast<std::size_t>(max_threads());
  if (caches.size() < threads) caches.resize(threads);
}

namespace {

double eval_window(const Checkpoint& ckpt, const PhysicsContext& physics, const Dataset& dataset,
                   int start, NetworkCache& cache, std::vector<double>* grad) {
  const int tau = ckpt.shape.tau;
  std::vector<double> f = window_features(dataset, start, tau);
  normalize_features(ckpt.norm, f);
  network_forward(ckpt.shape, ckpt.params, f.data(), cache);

  const auto& last = dataset.rows[static_cast<std::size_t>(start + tau)];
  const auto& target = dataset.rows[static_cast<std::size_t>(start + tau + 1)];

  ModelOutput est;
  std::array<double, kNumCoef> z{};
  if (ckpt.kind == ModelKind::Ddm) {
    for (std::size_t i = 0; i < kNumCoef; ++i) z[i] = cache.out[i];
    est.coeffs = physics_guard(z, ckpt.bounds);
    // Guard containment is part of the training contract.
    if (!ckpt.bounds.contains(est.coeffs)) {
      throw std::logic_error("train: guard output left its bounds");
    }
  } else {
    for (std::size_t i = 0; i < kDpmCoefMap.size(); ++i) est.coeffs[kDpmCoefMap[i]] = cache.out[i];
    est.coeffs[kIz] = ckpt.fixed_iz;
    est.frx = cache.out[kDpmOutputs - 1];
    est.has_frx = true;
  }

  const VelocityStepCache step =
      est.has_frx ? step_velocity_record_fixed_frx(last.vel, last.input, physics.known, est.coeffs,
                                                   est.frx, physics.ts, physics.limits)
                  : step_velocity_record(last.vel, last.input, physics.known, est.coeffs,
                                         physics.ts, physics.limits);

  const double e0 = step.next.v_x - target.vel.v_x;
  const double e1 = step.next.v_y - target.vel.v_y;
  const double e2 = step.next.omega - target.vel.omega;
  const double value = (e0 * e0 + e1 * e1 + e2 * e2) / 3.0;
  if (!grad) return value;

  const std::array<double, 5> adj_next = {2.0 * e0 / 3.0, 2.0 * e1 / 3.0, 2.0 * e2 / 3.0, 0.0, 0.0};
  const VelocityStepAdjoint adj = step_velocity_vjp(step, adj_next);

  if (ckpt.kind == ModelKind::Ddm) {
    const auto adj_z = physics_guard_grad(z, ckpt.bounds, adj.coeffs);
    network_backward(ckpt.shape, ckpt.params, f.data(), cache, adj_z.data(), *grad);
  } else {
    std::array<double, kDpmOutputs> adj_out{};
    for (std::size_t i = 0; i < kDpmCoefMap.size(); ++i) adj_out[i] = adj.coeffs[kDpmCoefMap[i]];
    adj_out[kDpmOutputs - 1] = adj.frx;
    network_backward(ckpt.shape, ckpt.params, f.data(), cache, adj_out.data(), *grad);
  }
  return value;
}

}  // namespace

double window_loss_grad(const Checkpoint& ckpt, const PhysicsContext& physics,
                        const Dataset& dataset, int start, std::vector<double>& grad,
                        NetworkCache& cache) {
  return eval_window(ckpt, physics, dataset, start, cache, &grad);
}

double window_loss(const Checkpoint& ckpt, const PhysicsContext& physics, const Dataset& dataset,
                   int start, NetworkCache& cache) {
  return eval_window(ckpt, physics, dataset, start, cache, nullptr);
}

double batch_loss_grad(const Checkpoint& ckpt, const PhysicsContext& physics,
                       const WindowSet& windows, std::span<const int> batch,
                       BatchWorkspace& workspace, std::vector<double>& grad_out, bool parallel) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("batch_loss_grad: empty batch");
  workspace.prepare(n, ckpt.params.size());

  const auto body = [&](std::size_t i) {
    NetworkCache& cache = workspace.caches[static_cast<std::size_t>(thread_id())];
    workspace.losses[i] = window_loss_grad(ckpt, physics, *windows.data,
                                           batch[static_cast<std::ptrdiff_t>(i)],
                                           workspace.grads[i], cache);
  };

  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }

  tree_reduce_sum_vectors(workspace.grads, n, grad_out);
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& g : grad_out) g *= inv;
  return tree_reduce_sum(std::span<double>(workspace.losses.data(), n)) * inv;
}

double batch_loss_grad_serial(const Checkpoint& ckpt, const PhysicsContext& physics,
                              const WindowSet& windows, std::span<const int> batch,
                              BatchWorkspace& workspace, std::vector<double>& grad_out) {
  return batch_loss_grad(ckpt, physics, windows, batch, workspace, grad_out, false);
}

double mean_loss(const Checkpoint& ckpt, const PhysicsContext& physics, const WindowSet& windows,
                 BatchWorkspace& workspace, bool parallel) {
  const std::size_t n = windows.size();
  if (n == 0) throw std::invalid_argument("mean_loss: no windows");
  workspace.losses.assign(n, 0.0);
  const auto threads = static_cast<std::size_t>(max_threads());
  if (workspace.caches.size() < threads) workspace.caches.resize(threads);

  const auto body = [&](std::size_t i) {
    NetworkCache& cache = workspace.caches[static_cast<std::size_t>(thread_id())];
    workspace.losses[i] =
        window_loss(ckpt, physics, *windows.data, windows.starts[i], cache);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
  return tree_reduce_sum(std::span<double>(workspace.losses.data(), n)) /
         static_cast<double>(n);
}

void AdamState::update(std::vector<double>& params, const std::vector<double>& grad, double lr,
                       double beta1, double beta2, double epsilon) {
  ++step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + epsilon);
  }
}

std::string training_report_to_json(const TrainingReport& report) {
  nlohmann::json j;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  j["epochs"] = epochs;
  j["best_epoch"] = report.best_epoch;
  j["best_val_loss"] = report.best_val_loss;
  nlohmann::json means;
  for (int i = 0; i < kNumCoef; ++i) {
    means[std::string(kCoefNames[static_cast<std::size_t>(i)])] =
        report.val_coeff_mean[static_cast<std::size_t>(i)];
  }
  j["val_coeff_mean"] = means;
  j["val_frx_mean"] = report.val_frx_mean;
  j["diverged"] = report.diverged;
  j["n_train_windows"] = report.n_train_windows;
  j["n_val_windows"] = report.n_val_windows;
  return j.dump(2);
}

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const CoefficientBounds& bounds, ModelKind kind, const PhysicsContext& physics,
                  double fixed_iz) {
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (is_dpm(kind) && !(fixed_iz > 0.0))
    throw std::invalid_argument("train: DPM variants need a positive fixed_iz");

  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.fixed_iz = is_dpm(kind) ? fixed_iz : 0.0;
  ckpt.shape = make_shape(config, kind);
  ckpt.bounds = bounds;
  ckpt.bounds.validate();
  ckpt.norm = fit_normalization(dataset);
  ckpt.train_config = config;
  // Zeroing the DDM output layer starts every coefficient at its interval
  // midpoint. The DPM head must start non-zero: its force terms have zero
  // gradient at the all-zero coefficient point.
  ckpt.params = network_init(ckpt.shape, config.seed, kind == ModelKind::Ddm);

  const WindowSet all = build_windows(dataset, config.tau, kVxFloor);
  if (all.size() < 2) throw std::invalid_argument("train: dataset yields fewer than two windows");
  auto [train_ws, val_ws] = split(all, config.validation_fraction, config.seed);
  if (static_cast<int>(train_ws.size()) < config.batch_size) {
    throw std::invalid_argument("train: fewer training windows than batch_size");
  }

  TrainingReport report;
  report.n_train_windows = static_cast<int>(train_ws.size());
  report.n_val_windows = static_cast<int>(val_ws.size());

  BatchWorkspace ws;
  std::vector<double> grad(ckpt.params.size(), 0.0);
  AdamState adam(ckpt.params.size());
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  double best_val = mean_loss(ckpt, physics, val_ws, ws, config.parallel);
  std::vector<double> best_params = ckpt.params;
  report.best_epoch = -1;
  report.best_val_loss = best_val;

  std::vector<int> order = train_ws.starts;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    std::size_t batches = 0;
    bool finite = true;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len =
          std::min(order.size() - at, static_cast<std::size_t>(config.batch_size));
      const double batch_loss =
          batch_loss_grad(ckpt, physics, train_ws, std::span<const int>(order.data() + at, len),
                          ws, grad, config.parallel);
      if (!std::isfinite(batch_loss)) {
        finite = false;
        break;
      }
      bool grad_finite = true;
      for (const double g : grad) {
        if (!std::isfinite(g)) {
          grad_finite = false;
          break;
        }
      }
      if (!grad_finite) {
        finite = false;
        break;
      }
      adam.update(ckpt.params, grad, config.learning_rate, config.beta1, config.beta2,
                  config.epsilon);
      epoch_loss_sum += batch_loss;
      ++batches;
    }

    if (!finite) {
      report.diverged = true;
      break;
    }

    EpochStats stats;
    stats.train_loss = batches > 0 ? epoch_loss_sum / static_cast<double>(batches) : 0.0;
    stats.val_loss = mean_loss(ckpt, physics, val_ws, ws, config.parallel);
    report.epochs.push_back(stats);

    if (std::isfinite(stats.val_loss) && stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_params = ckpt.params;
      report.best_epoch = epoch;
      report.best_val_loss = best_val;
    }
  }

  ckpt.params = std::move(best_params);

  // Mean validation-set estimates for the returned parameters.
  const Estimator est = Estimator::from_checkpoint(ckpt);
  std::vector<std::vector<double>> per_window(val_ws.size());
  for (std::size_t i = 0; i < val_ws.size(); ++i) {
    const ModelOutput out = est.estimate(dataset, val_ws.starts[i]);
    per_window[i].assign(kNumCoef + 1, 0.0);
    for (int c = 0; c < kNumCoef; ++c) per_window[i][static_cast<std::size_t>(c)] = out.coeffs[c];
    per_window[i][kNumCoef] = out.frx;
  }
  std::vector<double> sums;
  tree_reduce_sum_vectors(per_window, per_window.size(), sums);
  const double inv = val_ws.size() > 0 ? 1.0 / static_cast<double>(val_ws.size()) : 0.0;
  for (int c = 0; c < kNumCoef; ++c) {
    report.val_coeff_mean[static_cast<std::size_t>(c)] = sums[static_cast<std::size_t>(c)] * inv;
  }
  report.val_frx_mean = sums[kNumCoef] * inv;

  return {std::move(ckpt), std::move(report)};
}

}  // namespace vdlab
