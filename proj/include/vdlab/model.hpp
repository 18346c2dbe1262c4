#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vdlab/coefficients.hpp"
#include "vdlab/dataset.hpp"
#include "vdlab/network.hpp"
#include "vdlab/types.hpp"

namespace vdlab {

// DDM estimates all 17 coefficients through the guard; the DPM baselines
// estimate the eight Pacejka B/C/D/E entries plus a direct longitudinal
// force, unguarded, with a fixed assumed I_z.
enum class ModelKind { Ddm, DpmGt, DpmPlus20, DpmMinus20 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
bool is_dpm(ModelKind kind);
double dpm_iz_factor(ModelKind kind);  // 1.0 / 1.2 / 0.8

inline constexpr int kDpmOutputs = 9;  // B,C,D,E front/rear + F_rx
inline constexpr std::array<int, 8> kDpmCoefMap = {kBf, kCf, kDf, kEf, kBr, kCr, kDr, kEr};

// Per-feature standardization, frozen at training time.
struct Normalization {
  std::array<double, kFeaturesPerStep> mean{};
  std::array<double, kFeaturesPerStep> std{};
};

Normalization fit_normalization(const Dataset& dataset);

struct TrainConfig {
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplicative decay; 1.0 = constant
  int batch_size = 64;
  int epochs = 300;
  int tau = 2;
  std::vector<int> hidden = {64, 64};
  int recurrent_layers = 0;  // 0 = plain MLP; width follows hidden.front()
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool parallel = true;
};

NetworkShape make_shape(const TrainConfig& config, ModelKind kind);

struct PhysicsContext {
  KnownCoefficients known;
  ActuatorLimits limits;
  double ts = 0.02;
};

// Everything needed to run a trained estimator, serialized as one JSON file.
struct Checkpoint {
  int schema_version = 1;
  ModelKind kind = ModelKind::Ddm;
  double fixed_iz = 0.0;  // DPM only
  NetworkShape shape;
  std::vector<double> params;
  CoefficientBounds bounds;
  Normalization norm;
  TrainConfig train_config;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct ModelOutput {
  UnknownCoefficients coeffs;
  double frx = 0.0;     // direct longitudinal force (DPM)
  bool has_frx = false;
};

// Raw (unnormalized) features of one history window, oldest step first.
std::vector<double> window_features(const Dataset& dataset, int start, int tau);
void normalize_features(const Normalization& norm, std::vector<double>& features);

// A coefficient source for evaluation and control: either a trained network
// or a fixed vector (the ground-truth pseudo-checkpoint).
class Estimator {
 public:
  static Estimator from_checkpoint(Checkpoint ckpt);
  static Estimator fixed(const UnknownCoefficients& coeffs);

  // Estimate from the tau+1 history rows starting at `start`.
  ModelOutput estimate(const Dataset& dataset, int start) const;
  // Estimate from an in-memory history (used by the closed-loop controller).
  ModelOutput estimate_window(const std::vector<double>& raw_features) const;

  bool is_fixed() const { return fixed_.has_value(); }
  const Checkpoint& checkpoint() const;
  int tau() const { return fixed_ ? 0 : ckpt_.shape.tau; }

 private:
  Checkpoint ckpt_;
  std::optional<UnknownCoefficients> fixed_;
};

// One-step prediction through the dynamics; the seam between the network and
// the physics layer.
VelocityState predict_next(const VelocityState& state, const ControlInput& input,
                           const PhysicsContext& physics, const ModelOutput& est);

// Mean squared error across exactly (v_x, v_y, omega).
double loss(const VelocityState& predicted, const VelocityState& observed);

}  // namespace vdlab
