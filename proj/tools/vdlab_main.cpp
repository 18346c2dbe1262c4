// vdlab: vehicle-dynamics identification pipeline.
//
// Subcommands: generate, train, tune, eval, race. One JSON run configuration
// drives everything; command-line flags override individual fields.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
//             4 training divergence, 5 race abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "vdlab/config.hpp"
#include "vdlab/dynamics.hpp"
#include "vdlab/evaluation.hpp"
#include "vdlab/train.hpp"
#include "vdlab/tune.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitRaceAbort = 5;

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text << '\n';
}

vdlab::Track pick_track(int index) {
  auto [t1, t2] = vdlab::make_tracks();
  return index == 1 ? t1 : t2;
}

// "gt" resolves to the ground-truth pseudo-checkpoint from the config.
vdlab::Estimator resolve_estimator(const vdlab::RunConfig& config, const std::string& spec) {
  if (spec == "gt") return vdlab::Estimator::fixed(config.ground_truth);
  return vdlab::Estimator::from_checkpoint(vdlab::load_checkpoint(spec));
}

std::string stem_of(const std::string& spec) {
  if (spec == "gt") return "gt";
  return fs::path(spec).stem().string();
}

int cmd_generate(const vdlab::RunConfig& config) {
  fs::create_directories(config.data_dir);
  auto [track1, track2] = vdlab::make_tracks();
  vdlab::save_track_json(track1, config.data_dir + "/track1.json");
  vdlab::save_track_json(track2, config.data_dir + "/track2.json");

  const auto run = [&](const vdlab::Track& track, std::uint64_t seed, const std::string& name) {
    vdlab::Dataset full =
        vdlab::pure_pursuit_drive(track, config.vehicle, config.ground_truth, config.datagen_laps,
                                  config.rate_hz, seed, config.limits, config.pure_pursuit);
    vdlab::Dataset out = vdlab::excerpt(full, static_cast<std::size_t>(config.datagen_warmup_rows),
                                        static_cast<std::size_t>(config.datagen_target_rows));
    if (out.rows.empty()) {
      throw vdlab::DataGenError("generate: warmup_rows consumed the whole drive for " + name);
    }
    const std::string path = config.data_dir + "/" + name;
    vdlab::save_csv(out, path);
    std::cout << "wrote " << path << " (" << out.rows.size() << " rows of " << full.rows.size()
              << " driven)\n";
  };
  run(track1, config.seed, "train.csv");
  run(track2, config.seed + 1, "test.csv");
  return 0;
}

int cmd_train(const vdlab::RunConfig& config, const std::string& model) {
  const vdlab::ModelKind kind = vdlab::model_kind_from_string(model);
  const vdlab::Dataset dataset = vdlab::load_csv(config.data_dir + "/train.csv");
  const double fixed_iz =
      vdlab::is_dpm(kind) ? config.ground_truth[vdlab::kIz] * vdlab::dpm_iz_factor(kind) : 0.0;

  const vdlab::TrainResult result = vdlab::train(dataset, config.train, config.resolve_bounds(),
                                                 kind, config.physics(), fixed_iz);

  fs::create_directories(config.checkpoint_dir);
  fs::create_directories(config.report_dir);
  const std::string ckpt_path = config.checkpoint_dir + "/" + model + ".json";
  vdlab::save_checkpoint(result.checkpoint, ckpt_path);
  write_text(config.report_dir + "/train_" + model + ".json",
             vdlab::training_report_to_json(result.report));
  std::cout << "wrote " << ckpt_path << " (best val loss " << result.report.best_val_loss
            << " at epoch " << result.report.best_epoch << ")\n";
  if (result.report.diverged) {
    std::cerr << "training diverged; checkpoint holds the last finite parameters\n";
    return kExitDiverged;
  }
  return 0;
}

int cmd_tune(const vdlab::RunConfig& config, const std::string& model, int budget) {
  const vdlab::ModelKind kind = vdlab::model_kind_from_string(model);
  const vdlab::Dataset dataset = vdlab::load_csv(config.data_dir + "/train.csv");
  const double fixed_iz =
      vdlab::is_dpm(kind) ? config.ground_truth[vdlab::kIz] * vdlab::dpm_iz_factor(kind) : 0.0;

  const vdlab::TuneResult result = vdlab::tune(dataset, config.train, config.resolve_bounds(),
                                               kind, config.physics(), budget, config.seed,
                                               fixed_iz);

  fs::create_directories(config.report_dir);
  vdlab::save_trials_csv(result, config.report_dir + "/tune_trials.csv");

  // Emit the winning configuration as a config fragment.
  nlohmann::json best = {{"learning_rate", result.best.learning_rate},
                         {"batch_size", result.best.batch_size},
                         {"epochs", result.best.epochs},
                         {"tau", result.best.tau},
                         {"hidden", result.best.hidden},
                         {"recurrent_layers", result.best.recurrent_layers},
                         {"validation_fraction", result.best.validation_fraction}};
  write_text(config.report_dir + "/tuned_train_config.json",
             nlohmann::json{{"train", best}}.dump(2));
  std::cout << "best val loss " << result.best_val_loss << " over " << budget << " trials\n";
  return 0;
}

int cmd_eval(const vdlab::RunConfig& config, const std::string& checkpoint,
             const std::string& dataset_path, double horizon_ms) {
  const vdlab::Estimator estimator = resolve_estimator(config, checkpoint);
  const vdlab::Dataset dataset = vdlab::load_csv(dataset_path);
  const int tau = estimator.is_fixed() ? config.train.tau : estimator.checkpoint().shape.tau;

  const vdlab::OpenLoopReport open = vdlab::open_loop_report(
      estimator, dataset, tau, config.physics(), horizon_ms / 1000.0, config.train.parallel);
  const vdlab::CoefficientReport coeff = vdlab::coefficient_report(
      estimator, dataset, tau, config.resolve_bounds(), config.ground_truth);

  fs::create_directories(config.report_dir);
  const std::string stem = stem_of(checkpoint);
  write_text(config.report_dir + "/openloop_" + stem + ".json",
             vdlab::open_loop_report_to_json(open));
  write_text(config.report_dir + "/coefficients_" + stem + ".json",
             vdlab::coefficient_report_to_json(coeff));
  std::cout << "v_x rmse " << open.v_x.rmse << ", v_y rmse " << open.v_y.rmse << ", omega rmse "
            << open.omega.rmse << ", ade " << open.ade << ", fde " << open.fde << "\n";
  return 0;
}

int cmd_race(const vdlab::RunConfig& config, const std::string& checkpoint, int laps) {
  const vdlab::Estimator estimator = resolve_estimator(config, checkpoint);
  const vdlab::Track track = pick_track(config.race_track);

  vdlab::RaceOptions options = config.race;
  options.laps = laps > 0 ? laps : options.laps;

  const vdlab::RaceReport report = vdlab::race(track, estimator, config.ground_truth,
                                               config.physics(), config.mpc, options);

  fs::create_directories(config.report_dir);
  const std::string stem = stem_of(checkpoint);
  vdlab::save_race_trace_csv(report, config.report_dir + "/race_" + stem + ".csv");
  write_text(config.report_dir + "/race_" + stem + "_summary.json",
             vdlab::race_summary_to_json(report));

  if (!report.completed) {
    std::cerr << "race aborted: " << report.abort_reason << "\n";
    return kExitRaceAbort;
  }
  std::cout << "lap time " << report.lap_times.front() << " s, avg speed " << report.avg_speed
            << " m/s, violations " << report.violations << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vehicle-dynamics identification lab"};
  app.require_subcommand(1);

  std::string config_path = "configs/sim_default.json";
  app.add_option("-c,--config", config_path, "run configuration JSON")->capture_default_str();
  std::optional<std::uint64_t> seed_override;
  app.add_option("--seed", seed_override, "override the configured seed");

  auto* generate = app.add_subcommand("generate", "drive both tracks and write CSV datasets");

  std::string model = "ddm";
  auto* train = app.add_subcommand("train", "train a model on the generated training set");
  train->add_option("--model", model, "ddm|dpm-gt|dpm-plus20|dpm-minus20")->capture_default_str();
  std::optional<int> epochs_override;
  train->add_option("--epochs", epochs_override, "override train.epochs");

  int budget = 20;
  std::string tune_model = "ddm";
  auto* tune = app.add_subcommand("tune", "random hyperparameter search");
  tune->add_option("--budget", budget, "number of trials")->capture_default_str();
  tune->add_option("--model", tune_model, "model kind to tune")->capture_default_str();

  std::string checkpoint = "gt";
  std::string dataset_path;
  double horizon_ms = 0.0;
  auto* eval = app.add_subcommand("eval", "open-loop metrics and coefficient report");
  eval->add_option("--checkpoint", checkpoint, "checkpoint path, or 'gt'")->capture_default_str();
  eval->add_option("--dataset", dataset_path, "dataset CSV (default: <data_dir>/test.csv)");
  eval->add_option("--horizon-ms", horizon_ms, "rollout horizon (default: eval.horizon_ms)");

  std::string race_checkpoint = "gt";
  int race_laps = 0;
  auto* race = app.add_subcommand("race", "closed-loop lap on the configured track");
  race->add_option("--checkpoint", race_checkpoint, "checkpoint path, or 'gt'")
      ->capture_default_str();
  race->add_option("--laps", race_laps, "lap count (default: race.laps)");

  CLI11_PARSE(app, argc, argv);

  try {
    vdlab::RunConfig config = vdlab::load_run_config(config_path);
    if (seed_override) {
      config.seed = *seed_override;
      config.train.seed = *seed_override;
    }

    if (generate->parsed()) return cmd_generate(config);
    if (train->parsed()) {
      if (epochs_override) config.train.epochs = *epochs_override;
      return cmd_train(config, model);
    }
    if (tune->parsed()) return cmd_tune(config, tune_model, budget);
    if (eval->parsed()) {
      const std::string data = dataset_path.empty() ? config.data_dir + "/test.csv" : dataset_path;
      const double horizon = horizon_ms > 0.0 ? horizon_ms : config.eval_horizon_ms;
      return cmd_eval(config, checkpoint, data, horizon);
    }
    if (race->parsed()) return cmd_race(config, race_checkpoint, race_laps);
  } catch (const vdlab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const vdlab::DataError& e) {
    std::cerr << e.what() << "\n";
    return kExitData;
  } catch (const vdlab::DataGenError& e) {
    std::cerr << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
