#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdlab/train.hpp"

namespace vdlab {

struct TuneTrial {
  int index = 0;
  TrainConfig config;
  double best_val_loss = 0.0;
  bool diverged = false;
};

struct TuneResult {
  TrainConfig best;
  double best_val_loss = 0.0;
  std::vector<TuneTrial> trials;
};

// Random search over learning rate (log-uniform 1e-4..1e-2), batch size
// {32,64,128}, hidden depth 1..3, width {32,64,128,256}, recurrent layers
// {0,1,2} and tau {1,2,4,8}. Every trial trains with epochs/val-fraction from
// `base` and a seed derived from the search seed.
TuneResult tune(const Dataset& dataset, const TrainConfig& base, const CoefficientBounds& bounds,
                ModelKind kind, const PhysicsContext& physics, int budget, std::uint64_t seed,
                double fixed_iz = 0.0);

void save_trials_csv(const TuneResult& result, const std::string& path);

}  // namespace vdlab
