#include "vdlab/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "vdlab/dynamics.hpp"

namespace vdlab {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ddm: return "ddm";
    case ModelKind::DpmGt: return "dpm-gt";
    case ModelKind::DpmPlus20: return "dpm-plus20";
    case ModelKind::DpmMinus20: return "dpm-minus20";
  }
  throw std::logic_error("unknown ModelKind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ddm") return ModelKind::Ddm;
  if (s == "dpm-gt") return ModelKind::DpmGt;
  if (s == "dpm-plus20") return ModelKind::DpmPlus20;
  if (s == "dpm-minus20") return ModelKind::DpmMinus20;
  throw std::invalid_argument("unknown model kind '" + s +
                              "' (expected ddm|dpm-gt|dpm-plus20|dpm-minus20)");
}

bool is_dpm(ModelKind kind) { return kind != ModelKind::Ddm; }

double dpm_iz_factor(ModelKind kind) {
  switch (kind) {
    case ModelKind::DpmGt: return 1.0;
    case ModelKind::DpmPlus20: return 1.2;
    case ModelKind::DpmMinus20: return 0.8;
    case ModelKind::Ddm: break;
  }
  throw std::invalid_argument("dpm_iz_factor: not a DPM kind");
}

Normalization fit_normalization(const Dataset& dataset) {
  if (dataset.rows.empty()) throw std::invalid_argument("fit_normalization: empty dataset");
  Normalization norm;
  const double n = static_cast<double>(dataset.rows.size());
  for (const auto& r : dataset.rows) {
    const std::array<double, kFeaturesPerStep> f = {r.vel.v_x,      r.vel.v_y,
                                                    r.vel.omega,    r.vel.throttle,
                                                    r.vel.steer,    r.input.dthrottle,
                                                    r.input.dsteer};
    for (int i = 0; i < kFeaturesPerStep; ++i)
      norm.mean[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
  }
  for (auto& m : norm.mean) m /= n;
  for (const auto& r : dataset.rows) {
    const std::array<double, kFeaturesPerStep> f = {r.vel.v_x,      r.vel.v_y,
                                                    r.vel.omega,    r.vel.throttle,
                                                    r.vel.steer,    r.input.dthrottle,
                                                    r.input.dsteer};
    for (std::size_t i = 0; i < kFeaturesPerStep; ++i) {
      const double d = f[i] - norm.mean[i];
      norm.std[i] += d * d;
    }
  }
  for (auto& s : norm.std) s = std::max(std::sqrt(s / n), 1e-8);
  return norm;
}

NetworkShape make_shape(const TrainConfig& config, ModelKind kind) {
  NetworkShape shape;
  shape.tau = config.tau;
  shape.gru_layers = config.recurrent_layers;
  shape.gru_width = config.recurrent_layers > 0 && !config.hidden.empty() ? config.hidden.front() : 0;
  shape.hidden = config.hidden;
  shape.out = is_dpm(kind) ? kDpmOutputs : kNumCoef;
  return shape;
}

std::vector<double> window_features(const Dataset& dataset, int start, int tau) {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(tau + 1) * kFeaturesPerStep);
  for (int j = 0; j <= tau; ++j) {
    const auto& r = dataset.rows[static_cast<std::size_t>(start + j)];
    f.push_back(r.vel.v_x);
    f.push_back(r.vel.v_y);
    f.push_back(r.vel.omega);
    f.push_back(r.vel.throttle);
    f.push_back(r.vel.steer);
    f.push_back(r.input.dthrottle);
    f.push_back(r.input.dsteer);
  }
  return f;
}

void normalize_features(const Normalization& norm, std::vector<double>& features) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::size_t ch = i % kFeaturesPerStep;
    features[i] = (features[i] - norm.mean[ch]) / norm.std[ch];
  }
}

// --- checkpoint serialization ------------------------------------------------

namespace {

nlohmann::json bounds_to_json(const CoefficientBounds& b) {
  nlohmann::json j;
  for (int i = 0; i < kNumCoef; ++i) {
    const auto u = static_cast<std::size_t>(i);
    j[std::string(kCoefNames[u])] = {b.lower[u], b.upper[u]};
  }
  return j;
}

CoefficientBounds bounds_from_json(const nlohmann::json& j) {
  CoefficientBounds b;
  for (int i = 0; i < kNumCoef; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const auto& pair = j.at(std::string(kCoefNames[u]));
    b.lower[u] = pair.at(0).get<double>();
    b.upper[u] = pair.at(1).get<double>();
  }
  b.validate();
  return b;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"learning_rate", c.learning_rate},
                        {"batch_size", c.batch_size},
                        {"epochs", c.epochs},
                        {"tau", c.tau},
                        {"hidden", c.hidden},
                        {"recurrent_layers", c.recurrent_layers},
                        {"seed", c.seed},
                        {"validation_fraction", c.validation_fraction},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"epsilon", c.epsilon},
                        {"parallel", c.parallel}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.tau = j.at("tau").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.recurrent_layers = j.at("recurrent_layers").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.beta1 = j.value("beta1", 0.9);
  c.beta2 = j.value("beta2", 0.999);
  c.epsilon = j.value("epsilon", 1e-8);
  c.parallel = j.value("parallel", true);
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["schema_version"] = ckpt.schema_version;
  j["kind"] = to_string(ckpt.kind);
  j["fixed_iz"] = ckpt.fixed_iz;
  j["shape"] = {{"tau", ckpt.shape.tau},
                {"gru_layers", ckpt.shape.gru_layers},
                {"gru_width", ckpt.shape.gru_width},
                {"hidden", ckpt.shape.hidden},
                {"out", ckpt.shape.out}};
  j["params"] = ckpt.params;
  j["bounds"] = bounds_to_json(ckpt.bounds);
  j["normalization"] = {{"mean", ckpt.norm.mean}, {"std", ckpt.norm.std}};
  j["train_config"] = train_config_to_json(ckpt.train_config);
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Checkpoint c;
  c.schema_version = j.at("schema_version").get<int>();
  if (c.schema_version != 1) {
    throw std::runtime_error("checkpoint: unsupported schema_version " +
                             std::to_string(c.schema_version));
  }
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.fixed_iz = j.at("fixed_iz").get<double>();
  const auto& s = j.at("shape");
  c.shape.tau = s.at("tau").get<int>();
  c.shape.gru_layers = s.at("gru_layers").get<int>();
  c.shape.gru_width = s.at("gru_width").get<int>();
  c.shape.hidden = s.at("hidden").get<std::vector<int>>();
  c.shape.out = s.at("out").get<int>();
  c.params = j.at("params").get<std::vector<double>>();
  if (static_cast<std::int64_t>(c.params.size()) != network_param_count(c.shape)) {
    throw std::runtime_error("checkpoint: parameter count does not match shape");
  }
  c.bounds = bounds_from_json(j.at("bounds"));
  const auto& n = j.at("normalization");
  c.norm.mean = n.at("mean").get<std::array<double, kFeaturesPerStep>>();
  c.norm.std = n.at("std").get<std::array<double, kFeaturesPerStep>>();
  c.train_config = train_config_from_json(j.at("train_config"));
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

// --- estimator ----------------------------------------------------------------

Estimator Estimator::from_checkpoint(Checkpoint ckpt) {
  Estimator e;
  e.ckpt_ = std::move(ckpt);
  return e;
}

Estimator Estimator::fixed(const UnknownCoefficients& coeffs) {
  Estimator e;
  e.fixed_ = coeffs;
  return e;
}

const Checkpoint& Estimator::checkpoint() const {
  if (fixed_) throw std::logic_error("Estimator: fixed estimator has no checkpoint");
  return ckpt_;
}

ModelOutput Estimator::estimate(const Dataset& dataset, int start) const {
  if (fixed_) {
    ModelOutput out;
    out.coeffs = *fixed_;
    return out;
  }
  std::vector<double> f = window_features(dataset, start, ckpt_.shape.tau);
  return estimate_window(f);
}

ModelOutput Estimator::estimate_window(const std::vector<double>& raw_features) const {
  if (fixed_) {
    ModelOutput out;
    out.coeffs = *fixed_;
    return out;
  }
  std::vector<double> f = raw_features;
  normalize_features(ckpt_.norm, f);
  NetworkCache cache;
  network_forward(ckpt_.shape, ckpt_.params, f.data(), cache);

  ModelOutput out;
  if (ckpt_.kind == ModelKind::Ddm) {
    std::array<double, kNumCoef> z{};
    for (int i = 0; i < kNumCoef; ++i) z[static_cast<std::size_t>(i)] = cache.out[static_cast<std::size_t>(i)];
    out.coeffs = physics_guard(z, ckpt_.bounds);
  } else {
    for (std::size_t i = 0; i < kDpmCoefMap.size(); ++i) {
      out.coeffs[kDpmCoefMap[i]] = cache.out[i];
    }
    out.coeffs[kIz] = ckpt_.fixed_iz;
    out.frx = cache.out[kDpmOutputs - 1];
    out.has_frx = true;
  }
  return out;
}

VelocityState predict_next(const VelocityState& state, const ControlInput& input,
                           const PhysicsContext& physics, const ModelOutput& est) {
  if (est.has_frx) {
    return step_velocity_record_fixed_frx(state, input, physics.known, est.coeffs, est.frx,
                                          physics.ts, physics.limits)
        .next;
  }
  return step_velocity(state, input, physics.known, est.coeffs, physics.ts, physics.limits);
}

double loss(const VelocityState& predicted, const VelocityState& observed) {
  const double e0 = predicted.v_x - observed.v_x;
  const double e1 = predicted.v_y - observed.v_y;
  const double e2 = predicted.omega - observed.omega;
  return (e0 * e0 + e1 * e1 + e2 * e2) / 3.0;
}

}  // namespace vdlab
