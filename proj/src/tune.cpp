#include "vdlab/tune.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "vdlab/rng.hpp"

namespace vdlab {

namespace {

TrainConfig sample_config(const TrainConfig& base, Rng& rng, std::uint64_t trial_seed) {
  static constexpr int kBatches[] = {32, 64, 128};
  static constexpr int kWidths[] = {32, 64, 128, 256};
  static constexpr int kRecurrent[] = {0, 1, 2};
  static constexpr int kTaus[] = {1, 2, 4, 8};

  TrainConfig c = base;
  c.learning_rate = std::pow(10.0, rng.uniform(-4.0, -2.0));
  c.batch_size = kBatches[rng.below(3)];
  const int depth = 1 + static_cast<int>(rng.below(3));
  const int width = kWidths[rng.below(4)];
  c.hidden.assign(static_cast<std::size_t>(depth), width);
  c.recurrent_layers = kRecurrent[rng.below(3)];
  c.tau = kTaus[rng.below(4)];
  c.seed = trial_seed;
  return c;
}

}  // namespace

TuneResult tune(const Dataset& dataset, const TrainConfig& base, const CoefficientBounds& bounds,
                ModelKind kind, const PhysicsContext& physics, int budget, std::uint64_t seed,
                double fixed_iz) {
  if (budget < 1) throw std::invalid_argument("tune: budget must be >= 1");

  Rng rng(seed);
  TuneResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  for (int i = 0; i < budget; ++i) {
    TuneTrial trial;
    trial.index = i;
    trial.config = sample_config(base, rng, seed * 1000003ULL + static_cast<std::uint64_t>(i));

    const TrainResult tr = train(dataset, trial.config, bounds, kind, physics, fixed_iz);
    trial.best_val_loss = tr.report.best_val_loss;
    trial.diverged = tr.report.diverged;
    result.trials.push_back(trial);

    if (std::isfinite(trial.best_val_loss) && trial.best_val_loss < result.best_val_loss) {
      result.best_val_loss = trial.best_val_loss;
      result.best = trial.config;
    }
  }
  if (!std::isfinite(result.best_val_loss)) {
    // every trial diverged before improving; fall back to the first sample
    result.best = result.trials.front().config;
    result.best_val_loss = result.trials.front().best_val_loss;
  }
  return result;
}

void save_trials_csv(const TuneResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trials_csv: cannot open " + path);
  out << "trial,learning_rate,batch_size,hidden_layers,hidden_width,recurrent_layers,tau,"
         "val_loss,diverged\n";
  char buf[256];
  for (const auto& t : result.trials) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%d,%zu,%d,%d,%d,%.12g,%d\n", t.index,
                  t.config.learning_rate, t.config.batch_size, t.config.hidden.size(),
                  t.config.hidden.empty() ? 0 : t.config.hidden.front(),
                  t.config.recurrent_layers, t.config.tau, t.best_val_loss,
                  t.diverged ? 1 : 0);
    out << buf;
  }
}

}  // namespace vdlab
