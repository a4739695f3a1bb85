#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "rdstack/models/model.hpp"
#include "rdstack/stacking.hpp"
#include "rdstack/synth_sim.hpp"

namespace rdstack::experiment {

namespace fs = std::filesystem;

struct TrainingParams {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 4;
  int epochs = 100;
  int patience = 20;

  friend bool operator==(const TrainingParams&, const TrainingParams&) = default;
};

/// Everything a run needs. Serialized as JSON; unknown keys are rejected.
struct ExperimentConfig {
  /// Ensemble directory, relative to the experiment directory unless absolute.
  std::string data_dir = "data";
  int simulations = 6;
  int train_count = 5;
  synth::SynthConfig synth;

  std::string import_source;
  int crop_h = 0;
  int crop_w = 0;

  std::string family = "convlstm";
  std::map<std::string, models::ModelSpec> specs;
  TrainingParams training;
  int m = 5;
  int n = 5;
  int levels = 3;
  int features = 7;
  std::uint64_t seed = 0;
  std::string device = "cpu";

  ExperimentConfig();

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);

  /// Family spec with m, n and the feature count applied.
  models::ModelSpec spec_for(models::Family family) const;
  TrainConfig train_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// The device actually used: the configured one, overridden by the
/// RDSTACK_DEVICE environment variable. Only "cpu" is available.
std::string resolve_device(const std::string& configured);

/// Layout of an experiment directory.
struct Layout {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path lock() const { return root / ".lock"; }
  fs::path data(const ExperimentConfig& cfg) const;
  fs::path generation() const { return root / "generation.json"; }
  fs::path stats() const { return root / "stats.json"; }
  fs::path stack(const std::string& family) const { return root / "models" / family; }
  fs::path rollouts(const std::string& family, int level) const;
  fs::path timing(const std::string& family) const { return root / "timing" / (family + ".json"); }
  fs::path eval(const std::string& family, int level) const;
  fs::path bulk(const std::string& family) const { return root / "bulk" / family; }
  fs::path report() const { return root / "report.md"; }
};

/// Exclusive marker file held for the duration of a command.
class ExperimentLock {
 public:
  explicit ExperimentLock(const fs::path& root);
  ~ExperimentLock();
  ExperimentLock(const ExperimentLock&) = delete;
  ExperimentLock& operator=(const ExperimentLock&) = delete;

 private:
  fs::path path_;
};

/// Loads root/config.json, or returns defaults when it does not exist.
ExperimentConfig load_config(const fs::path& root);
void save_config(const fs::path& root, const ExperimentConfig& cfg);

struct CommandOptions {
  bool overwrite = false;
  std::ostream* log = nullptr;
};

/// Synthetic ensemble: `simulations` runs with seeds synth.seed, synth.seed + 1, ...
/// and a seeded train/validation split. Records solver seconds per run.
void cmd_generate(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt);
void cmd_import(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt);
/// Fits normalization stats on the training split.
void cmd_preprocess(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt);
/// Trains level 0 of a family and writes its stack directory.
models::Checkpoint cmd_train(const fs::path& root, const ExperimentConfig& cfg, models::Family family,
                             const CommandOptions& opt);
/// Trains correction level k >= 1 on top of the saved levels 0..k-1.
models::Checkpoint cmd_stack(const fs::path& root, const ExperimentConfig& cfg, models::Family family, int k,
                             const CommandOptions& opt);

struct TimingReport {
  std::string family;
  std::size_t parameters = 0;  // summed over the levels used
  int levels = 0;              // corrections used
  double mean_forward_ms = 0.0;
  double mean_rollout_seconds = 0.0;
  int rollouts = 0;
  /// Mean synthetic-solver seconds per trajectory, 0 when unknown.
  double solver_seconds = 0.0;

  std::string table_row() const;
};

std::string timing_table_header();

/// Rolls out every validation simulation with levels 0..L (one result set
/// per level) and writes a timing report for the full stack.
TimingReport cmd_rollout(const fs::path& root, const ExperimentConfig& cfg, models::Family family, int levels,
                         const CommandOptions& opt);
/// Metric curves (CSV + SVG per channel and metric) for every rolled-out level.
void cmd_eval(const fs::path& root, const ExperimentConfig& cfg, models::Family family, const CommandOptions& opt);
/// Porosity and permeability series plus RMSE curves for every rolled-out level.
void cmd_bulk(const fs::path& root, const ExperimentConfig& cfg, models::Family family, const CommandOptions& opt);
/// Collates everything found in the experiment directory into report.md.
std::string cmd_report(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt);

}  // namespace rdstack::experiment
