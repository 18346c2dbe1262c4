#include "vdlab/config.hpp"

#include <fstream>

#include <json.hpp>

namespace vdlab {

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError("config: missing field '" + path + "'");
  return j.at(key);
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& path, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + path + "' has the wrong type");
  }
}

UnknownCoefficients coeffs_from_json(const json& j, const std::string& path) {
  UnknownCoefficients c;
  for (int i = 0; i < kNumCoef; ++i) {
    const std::string name(kCoefNames[static_cast<std::size_t>(i)]);
    if (!j.contains(name)) throw ConfigError("config: missing field '" + path + "." + name + "'");
    c[i] = j.at(name).get<double>();
  }
  return c;
}

json coeffs_to_json(const UnknownCoefficients& c) {
  json j;
  for (int i = 0; i < kNumCoef; ++i) {
    j[std::string(kCoefNames[static_cast<std::size_t>(i)])] = c[i];
  }
  return j;
}

}  // namespace

CoefficientBounds RunConfig::resolve_bounds() const {
  if (bounds_mode == "sim") return sim_nominal_bounds(ground_truth, sim_ranges);
  if (bounds_mode == "real") return real_nominal_bounds();
  if (bounds_mode == "explicit") {
    if (!explicit_bounds) {
      throw ConfigError("config: bounds_mode 'explicit' requires a 'bounds' object");
    }
    return *explicit_bounds;
  }
  throw ConfigError("config: field 'bounds_mode' must be sim|real|explicit, got '" + bounds_mode +
                    "'");
}

RunConfig default_run_config() {
  RunConfig c;
  // Ground truth for the 1:43-scale simulator. Pacejka lateral coefficients
  // and I_z are the recovery targets; G/K offsets are zero (plain Magic
  // Formula) and the drivetrain values are the simulator's constants.
  c.ground_truth[kBf] = 5.579;
  c.ground_truth[kCf] = 1.2;
  c.ground_truth[kDf] = 0.192;
  c.ground_truth[kEf] = -0.083;
  c.ground_truth[kGf] = 0.0;
  c.ground_truth[kKf] = 0.0;
  c.ground_truth[kBr] = 5.385;
  c.ground_truth[kCr] = 1.269;
  c.ground_truth[kDr] = 0.173;
  c.ground_truth[kEr] = -0.019;
  c.ground_truth[kGr] = 0.0;
  c.ground_truth[kKr] = 0.0;
  c.ground_truth[kCm1] = 0.287;
  c.ground_truth[kCm2] = 0.0545;
  c.ground_truth[kCr0] = 0.0218;
  c.ground_truth[kCd] = 0.00035;
  c.ground_truth[kIz] = 2.78e-5;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }

  RunConfig c = default_run_config();
  c.schema_version = get_field(j, "schema_version", "schema_version", 1);
  if (c.schema_version != 1) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
  }
  c.seed = get_field<std::uint64_t>(j, "seed", "seed", c.seed);

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    c.data_dir = get_field<std::string>(p, "data_dir", "paths.data_dir", c.data_dir);
    c.checkpoint_dir =
        get_field<std::string>(p, "checkpoint_dir", "paths.checkpoint_dir", c.checkpoint_dir);
    c.report_dir = get_field<std::string>(p, "report_dir", "paths.report_dir", c.report_dir);
  }

  if (j.contains("vehicle")) {
    const json& v = j.at("vehicle");
    c.vehicle.m = need(v, "m", "vehicle.m").get<double>();
    c.vehicle.l_f = need(v, "l_f", "vehicle.l_f").get<double>();
    c.vehicle.l_r = need(v, "l_r", "vehicle.l_r").get<double>();
    if (!(c.vehicle.m > 0.0 && c.vehicle.l_f > 0.0 && c.vehicle.l_r > 0.0)) {
      throw ConfigError("config: fields under 'vehicle' must be strictly positive");
    }
  }

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    c.rate_hz = get_field(s, "rate_hz", "sim.rate_hz", c.rate_hz);
    if (!(c.rate_hz > 0.0)) throw ConfigError("config: field 'sim.rate_hz' must be positive");
    c.limits.steer_max = get_field(s, "steer_max", "sim.steer_max", c.limits.steer_max);
    c.limits.dthrottle_max =
        get_field(s, "dthrottle_max", "sim.dthrottle_max", c.limits.dthrottle_max);
    c.limits.dsteer_max = get_field(s, "dsteer_max", "sim.dsteer_max", c.limits.dsteer_max);
  }

  if (j.contains("ground_truth")) c.ground_truth = coeffs_from_json(j.at("ground_truth"), "ground_truth");

  c.bounds_mode = get_field<std::string>(j, "bounds_mode", "bounds_mode", c.bounds_mode);
  if (j.contains("sim_ranges")) {
    const json& r = j.at("sim_ranges");
    auto pair = [&](const char* key, double& lo, double& hi) {
      if (!r.contains(key)) return;
      const auto& v = r.at(key);
      if (!v.is_array() || v.size() != 2) {
        throw ConfigError(std::string("config: field 'sim_ranges.") + key +
                          "' must be a [lower, upper] pair");
      }
      lo = v.at(0).get<double>();
      hi = v.at(1).get<double>();
    };
    pair("D", c.sim_ranges.d_lower, c.sim_ranges.d_upper);
    pair("G", c.sim_ranges.g_lower, c.sim_ranges.g_upper);
    pair("K", c.sim_ranges.k_lower, c.sim_ranges.k_upper);
  }
  if (j.contains("bounds")) {
    CoefficientBounds b;
    const json& jb = j.at("bounds");
    for (int i = 0; i < kNumCoef; ++i) {
      const std::string name(kCoefNames[static_cast<std::size_t>(i)]);
      const auto& pair = need(jb, name.c_str(), "bounds." + name);
      if (!pair.is_array() || pair.size() != 2) {
        throw ConfigError("config: field 'bounds." + name + "' must be a [lower, upper] pair");
      }
      b.lower[static_cast<std::size_t>(i)] = pair.at(0).get<double>();
      b.upper[static_cast<std::size_t>(i)] = pair.at(1).get<double>();
    }
    try {
      b.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: 'bounds': ") + e.what());
    }
    c.explicit_bounds = b;
  }

  if (j.contains("datagen")) {
    const json& d = j.at("datagen");
    c.datagen_laps = get_field(d, "laps", "datagen.laps", c.datagen_laps);
    c.datagen_target_rows = get_field(d, "target_rows", "datagen.target_rows", c.datagen_target_rows);
    c.datagen_warmup_rows = get_field(d, "warmup_rows", "datagen.warmup_rows", c.datagen_warmup_rows);
    auto& pp = c.pure_pursuit;
    pp.lookahead_gain = get_field(d, "lookahead_gain", "datagen.lookahead_gain", pp.lookahead_gain);
    pp.lookahead_min = get_field(d, "lookahead_min", "datagen.lookahead_min", pp.lookahead_min);
    pp.v_x0 = get_field(d, "v_x0", "datagen.v_x0", pp.v_x0);
    pp.throttle_kp = get_field(d, "throttle_kp", "datagen.throttle_kp", pp.throttle_kp);
    pp.throttle_dither = get_field(d, "throttle_dither", "datagen.throttle_dither", pp.throttle_dither);
    pp.steer_dither = get_field(d, "steer_dither", "datagen.steer_dither", pp.steer_dither);
    if (c.datagen_laps < 1) throw ConfigError("config: field 'datagen.laps' must be >= 1");
  }

  if (j.contains("speed_profile")) {
    const json& s = j.at("speed_profile");
    auto& pr = c.pure_pursuit.profile;
    pr.v_min = get_field(s, "v_min", "speed_profile.v_min", pr.v_min);
    pr.v_max = get_field(s, "v_max", "speed_profile.v_max", pr.v_max);
    pr.a_lat_max = get_field(s, "a_lat_max", "speed_profile.a_lat_max", pr.a_lat_max);
    pr.a_accel = get_field(s, "a_accel", "speed_profile.a_accel", pr.a_accel);
    pr.a_decel = get_field(s, "a_decel", "speed_profile.a_decel", pr.a_decel);
    c.race.profile = pr;
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    auto& tc = c.train;
    tc.learning_rate = get_field(t, "learning_rate", "train.learning_rate", tc.learning_rate);
    tc.batch_size = get_field(t, "batch_size", "train.batch_size", tc.batch_size);
    tc.epochs = get_field(t, "epochs", "train.epochs", tc.epochs);
    tc.tau = get_field(t, "tau", "train.tau", tc.tau);
    tc.hidden = get_field(t, "hidden", "train.hidden", tc.hidden);
    tc.recurrent_layers = get_field(t, "recurrent_layers", "train.recurrent_layers", tc.recurrent_layers);
    tc.validation_fraction =
        get_field(t, "validation_fraction", "train.validation_fraction", tc.validation_fraction);
    tc.beta1 = get_field(t, "beta1", "train.beta1", tc.beta1);
    tc.beta2 = get_field(t, "beta2", "train.beta2", tc.beta2);
    tc.epsilon = get_field(t, "epsilon", "train.epsilon", tc.epsilon);
    tc.parallel = get_field(t, "parallel", "train.parallel", tc.parallel);
    if (tc.batch_size < 1) throw ConfigError("config: field 'train.batch_size' must be >= 1");
    if (!(tc.validation_fraction > 0.0 && tc.validation_fraction < 1.0)) {
      throw ConfigError("config: field 'train.validation_fraction' must lie in (0, 1)");
    }
    if (tc.tau < 0) throw ConfigError("config: field 'train.tau' must be >= 0");
  }
  c.train.seed = c.seed;

  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    c.mpc.horizon = get_field(m, "horizon", "mpc.horizon", c.mpc.horizon);
    c.mpc.q = get_field(m, "q", "mpc.q", c.mpc.q);
    c.mpc.r = get_field(m, "r", "mpc.r", c.mpc.r);
    c.mpc.iterations = get_field(m, "iterations", "mpc.iterations", c.mpc.iterations);
    c.mpc.step_size = get_field(m, "step_size", "mpc.step_size", c.mpc.step_size);
    c.mpc.tolerance = get_field(m, "tolerance", "mpc.tolerance", c.mpc.tolerance);
    try {
      c.mpc.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: 'mpc': ") + e.what());
    }
  }

  if (j.contains("race")) {
    const json& r = j.at("race");
    c.race_track = get_field(r, "track", "race.track", c.race_track);
    c.race.laps = get_field(r, "laps", "race.laps", c.race.laps);
    c.race.v_x0 = get_field(r, "v_x0", "race.v_x0", c.race.v_x0);
    c.race.t_max_per_lap = get_field(r, "t_max_per_lap", "race.t_max_per_lap", c.race.t_max_per_lap);
    c.race.pid_kp = get_field(r, "pid_kp", "race.pid_kp", c.race.pid_kp);
    c.race.pid_ki = get_field(r, "pid_ki", "race.pid_ki", c.race.pid_ki);
    if (c.race_track != 1 && c.race_track != 2) {
      throw ConfigError("config: field 'race.track' must be 1 or 2");
    }
  }

  if (j.contains("eval")) {
    c.eval_horizon_ms = get_field(j.at("eval"), "horizon_ms", "eval.horizon_ms", c.eval_horizon_ms);
    if (!(c.eval_horizon_ms > 0.0)) {
      throw ConfigError("config: field 'eval.horizon_ms' must be positive");
    }
  }

  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["paths"] = {{"data_dir", c.data_dir},
                {"checkpoint_dir", c.checkpoint_dir},
                {"report_dir", c.report_dir}};
  j["vehicle"] = {{"m", c.vehicle.m}, {"l_f", c.vehicle.l_f}, {"l_r", c.vehicle.l_r}};
  j["sim"] = {{"rate_hz", c.rate_hz},
              {"steer_max", c.limits.steer_max},
              {"dthrottle_max", c.limits.dthrottle_max},
              {"dsteer_max", c.limits.dsteer_max}};
  j["ground_truth"] = coeffs_to_json(c.ground_truth);
  j["bounds_mode"] = c.bounds_mode;
  j["sim_ranges"] = {{"D", {c.sim_ranges.d_lower, c.sim_ranges.d_upper}},
                     {"G", {c.sim_ranges.g_lower, c.sim_ranges.g_upper}},
                     {"K", {c.sim_ranges.k_lower, c.sim_ranges.k_upper}}};
  j["datagen"] = {{"laps", c.datagen_laps},
                  {"target_rows", c.datagen_target_rows},
                  {"warmup_rows", c.datagen_warmup_rows},
                  {"lookahead_gain", c.pure_pursuit.lookahead_gain},
                  {"lookahead_min", c.pure_pursuit.lookahead_min},
                  {"v_x0", c.pure_pursuit.v_x0},
                  {"throttle_kp", c.pure_pursuit.throttle_kp},
                  {"throttle_dither", c.pure_pursuit.throttle_dither},
                  {"steer_dither", c.pure_pursuit.steer_dither}};
  j["speed_profile"] = {{"v_min", c.pure_pursuit.profile.v_min},
                        {"v_max", c.pure_pursuit.profile.v_max},
                        {"a_lat_max", c.pure_pursuit.profile.a_lat_max},
                        {"a_accel", c.pure_pursuit.profile.a_accel},
                        {"a_decel", c.pure_pursuit.profile.a_decel}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"tau", c.train.tau},
                {"hidden", c.train.hidden},
                {"recurrent_layers", c.train.recurrent_layers},
                {"validation_fraction", c.train.validation_fraction},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon", c.train.epsilon},
                {"parallel", c.train.parallel}};
  j["mpc"] = {{"horizon", c.mpc.horizon}, {"q", c.mpc.q},
              {"r", c.mpc.r},             {"iterations", c.mpc.iterations},
              {"step_size", c.mpc.step_size}, {"tolerance", c.mpc.tolerance}};
  j["race"] = {{"track", c.race_track},
               {"laps", c.race.laps},
               {"v_x0", c.race.v_x0},
               {"t_max_per_lap", c.race.t_max_per_lap},
               {"pid_kp", c.race.pid_kp},
               {"pid_ki", c.race.pid_ki}};
  j["eval"] = {{"horizon_ms", c.eval_horizon_ms}};
  return j.dump(2);
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write '" + path + "'");
  out << run_config_to_json(config) << '\n';
}

}  // namespace vdlab
