#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"
#include "rdstack/features.hpp"
#include "rdstack/models/checkpoint.hpp"
#include "rdstack/models/model.hpp"

namespace rdstack {

/// One normalized training pair: input [m * C_in, H, W] and target
/// [n * 4, H, W], identified by (sim_id, anchor).
struct Sample {
  std::string sim_id;
  int anchor = 0;
  std::vector<double> input;
  std::vector<double> target;
};

struct SampleSet {
  int height = 0;
  int width = 0;
  int input_channels = 0;  // per frame
  int input_steps = 0;
  int output_steps = 0;
  std::vector<Sample> samples;

  bool empty() const noexcept { return samples.empty(); }
  std::size_t size() const noexcept { return samples.size(); }
  nn::Shape input_shape(int batch) const { return {batch, input_steps * input_channels, height, width}; }
  nn::Shape target_shape(int batch) const { return {batch, output_steps * 4, height, width}; }
};

/// Level-0 pairs from every window (stride 1 by default) of the given simulations.
SampleSet make_samples(std::span<const Simulation* const> sims, int m, int n, const features::NormStats& stats,
                       features::FeatureSet set, int stride = 1);

struct TrainConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 4;
  int max_epochs = 100;
  int patience = 20;
  std::uint64_t seed = 0;
  /// Called after every epoch.
  std::function<void(const models::EpochRecord&)> on_epoch;
};

/// Fixed input map of a network (see SequenceModel::set_input_affine).
struct InputAffine {
  std::vector<double> scale;
  std::vector<double> offset;
};

/// Takes min-max scaled predictions of the four physical channels to the
/// standardized scale level 0 sees its inputs on.
InputAffine correction_input_affine(const features::NormStats& stats);

/// Trains one network with Adam on shuffled mini-batches, tracking the
/// validation loss (training loss when no validation set is given) for early
/// stopping. Returns the checkpoint of the best epoch.
models::Checkpoint train_network(const models::ModelSpec& spec, int level, const SampleSet& train,
                                 const SampleSet& validation, const TrainConfig& cfg, const std::string& stats_hash,
                                 const InputAffine& affine = {});

models::Checkpoint train_level0(const models::ModelSpec& spec, const SampleSet& train, const SampleSet& validation,
                                const TrainConfig& cfg, const std::string& stats_hash);

/// Ordered networks: level 0 maps model inputs to predictions, each
/// correction level maps the previous prediction to a refined one.
class StackedModel {
 public:
  StackedModel() = default;

  void add_level(models::Checkpoint checkpoint);
  /// Adds an untracked model (no checkpoint), e.g. a test stub.
  void add_model(std::shared_ptr<const models::SequenceModel> model, std::string stats_hash);

  int level_count() const noexcept { return static_cast<int>(models_.size()); }
  int corrections() const noexcept { return level_count() - 1; }
  const models::SequenceModel& model(int level) const;
  /// Checkpoint of a level; throws for untracked models.
  const models::Checkpoint& checkpoint(int level) const;
  const std::string& stats_hash() const noexcept { return stats_hash_; }
  /// Checkpoint hash per level ("" for untracked models).
  std::vector<std::string> hashes() const;

  /// Level 0 then levels 1..upto (all levels when upto < 0). Runs without
  /// recording gradients.
  nn::Tensor refine(const nn::Tensor& x, int upto = -1) const;

  /// Total forward passes over all levels.
  long forward_count() const;

  /// Writes level_<k>.ckpt files and stack.json with their hashes.
  void save(const std::filesystem::path& dir) const;
  static StackedModel load(const std::filesystem::path& dir);

 private:
  void check_compatible(const models::ModelSpec& spec) const;

  std::vector<std::shared_ptr<const models::SequenceModel>> models_;
  std::vector<std::optional<models::Checkpoint>> checkpoints_;
  std::string stats_hash_;
};

/// Spec of correction levels: same architecture, predicted channels as input.
models::ModelSpec correction_spec(const models::ModelSpec& level0);

/// Pairs (prediction of the prefix, truth) over the same anchors.
struct LevelDataset {
  int level = 1;  // level the dataset trains
  SampleSet pairs;
};

using Predictor = std::function<std::vector<double>(const Sample&)>;

/// Runs `predict` on every level-0 sample; the result becomes the input of
/// the next level, the target is kept.
LevelDataset build_level_dataset(const Predictor& predict, int level, const SampleSet& level0_samples);
/// Uses the whole stack as the prefix; the dataset trains level stack.level_count().
LevelDataset build_level_dataset(const StackedModel& prefix, const SampleSet& level0_samples);

models::Checkpoint train_correction_level(int k, const LevelDataset& train, const LevelDataset& validation,
                                          const models::ModelSpec& level0_spec, const TrainConfig& cfg,
                                          const features::NormStats& stats);

/// Mean squared error of `inputs` (treated as predictions) against targets.
double mean_pair_mse(const SampleSet& pairs);

inline constexpr const char* kStackManifest = "stack.json";

}  // namespace rdstack
