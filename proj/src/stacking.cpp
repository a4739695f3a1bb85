#include "rdstack/stacking.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "rdstack/error.hpp"
#include "rdstack/models/losses.hpp"
#include "rdstack/nn/adam.hpp"
#include "rdstack/nn/ops.hpp"
#include "rdstack/storage.hpp"

namespace rdstack {

using models::Checkpoint;
using models::ModelSpec;
using nn::Tensor;
using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor gather(const SampleSet& set, std::span<const std::size_t> order, bool input) {
  const int b = static_cast<int>(order.size());
  const nn::Shape shape = input ? set.input_shape(b) : set.target_shape(b);
  std::vector<double> values;
  values.reserve(shape.numel());
  for (std::size_t idx : order) {
    const auto& src = input ? set.samples[idx].input : set.samples[idx].target;
    values.insert(values.end(), src.begin(), src.end());
  }
  if (values.size() != shape.numel()) fail(ErrorCategory::shape_mismatch, "sample size does not match its set");
  return Tensor::from(shape, std::move(values));
}

double evaluate_loss(const models::SequenceModel& model, const SampleSet& set, int batch) {
  nn::NoGradGuard guard;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(batch));
    const std::span<const std::size_t> idx(order.data() + start, count);
    const Tensor loss = models::family_loss(model.spec(), model.forward(gather(set, idx, true)), gather(set, idx, false));
    total += loss.item() * static_cast<double>(count);
  }
  return total / static_cast<double>(set.size());
}

void check_set(const ModelSpec& spec, const SampleSet& set, const char* what) {
  if (set.empty()) return;
  if (set.input_channels != spec.in_channels || set.input_steps != spec.m || set.output_steps != spec.n) {
    fail(ErrorCategory::shape_mismatch,
         std::string(what) + " samples (" + std::to_string(set.input_steps) + " x " +
             std::to_string(set.input_channels) + " -> " + std::to_string(set.output_steps) +
             ") do not fit the model spec (" + std::to_string(spec.m) + " x " + std::to_string(spec.in_channels) +
             " -> " + std::to_string(spec.n) + ")");
  }
}

}  // namespace

SampleSet make_samples(std::span<const Simulation* const> sims, int m, int n, const features::NormStats& stats,
                       features::FeatureSet set, int stride) {
  SampleSet out;
  out.input_channels = features::channel_count(set);
  out.input_steps = m;
  out.output_steps = n;
  for (const Simulation* sim : sims) {
    if (out.height == 0) {
      out.height = sim->height();
      out.width = sim->width();
    } else if (sim->height() != out.height || sim->width() != out.width) {
      fail(ErrorCategory::shape_mismatch, "simulation " + sim->id + " has a different grid size");
    }
    for (const Window& w : make_windows(*sim, m, n, stride)) {
      std::vector<State> inputs;
      std::vector<State> targets;
      for (int k = 0; k < m; ++k) inputs.push_back(w.input(k));
      for (int k = 0; k < n; ++k) targets.push_back(w.target(k));
      out.samples.push_back({sim->id, w.anchor(), features::normalize_inputs(inputs, stats, set),
                             features::normalize_outputs(targets, stats)});
    }
  }
  return out;
}

Checkpoint train_network(const ModelSpec& spec, int level, const SampleSet& train, const SampleSet& validation,
                         const TrainConfig& cfg, const std::string& stats_hash, const InputAffine& affine) {
  spec.validate();
  if (train.empty()) fail(ErrorCategory::data, "empty training set");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1 || cfg.learning_rate <= 0.0) {
    fail(ErrorCategory::config, "training config needs positive batch size, epochs, patience and learning rate");
  }
  check_set(spec, train, "training");
  check_set(spec, validation, "validation");

  auto model = models::make_model(spec, mix_seed(cfg.seed, static_cast<std::uint64_t>(level)));
  model->set_input_affine(affine.scale, affine.offset);
  nn::Adam adam(model->parameters().tensors(), {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8});
  std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(level)));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  std::vector<models::EpochRecord> log;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<models::ParameterBlob> best_params;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(order.size() - start, batch);
      const std::span<const std::size_t> idx(order.data() + start, count);
      adam.zero_grad();
      const Tensor loss = models::family_loss(spec, model->forward(gather(train, idx, true)), gather(train, idx, false));
      loss.backward();
      adam.step();
      total += loss.item() * static_cast<double>(count);
    }
    models::EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train.size());
    rec.validation_loss = validation.empty() ? rec.train_loss : evaluate_loss(*model, validation, cfg.batch_size);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(rec);
    if (cfg.on_epoch) cfg.on_epoch(rec);

    if (rec.validation_loss < best) {
      best = rec.validation_loss;
      best_epoch = epoch;
      best_params = Checkpoint::capture(*model, level, "").parameters;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (!best_params.empty()) models::load_parameters(*model, best_params);
  return Checkpoint::capture(*model, level, stats_hash, std::move(log), best_epoch);
}

Checkpoint train_level0(const ModelSpec& spec, const SampleSet& train, const SampleSet& validation,
                        const TrainConfig& cfg, const std::string& stats_hash) {
  return train_network(spec, 0, train, validation, cfg, stats_hash);
}

ModelSpec correction_spec(const ModelSpec& level0) {
  ModelSpec s = level0;
  s.in_channels = s.out_channels;
  s.residual = true;
  if (s.m != s.n) fail(ErrorCategory::config, "stacking needs m == n");
  return s;
}

void StackedModel::check_compatible(const ModelSpec& spec) const {
  if (models_.empty()) return;
  const ModelSpec& base = models_.front()->spec();
  if (spec.family != base.family || spec.m != base.m || spec.n != base.n || spec.out_channels != base.out_channels) {
    fail(ErrorCategory::shape_mismatch, "stack levels must share family, m, n and output channels");
  }
  if (!(spec == correction_spec(base))) {
    fail(ErrorCategory::shape_mismatch, "correction level spec must equal the level-0 spec with " +
                                            std::to_string(base.out_channels) + " input channels");
  }
}

void StackedModel::add_level(Checkpoint checkpoint) {
  if (checkpoint.level != level_count()) {
    fail(ErrorCategory::invalid_argument, "checkpoint of level " + std::to_string(checkpoint.level) +
                                              " cannot be stacked at position " + std::to_string(level_count()));
  }
  std::shared_ptr<const models::SequenceModel> model = checkpoint.instantiate();
  add_model(std::move(model), checkpoint.stats_hash);
  checkpoints_.back() = std::move(checkpoint);
}

void StackedModel::add_model(std::shared_ptr<const models::SequenceModel> model, std::string stats_hash) {
  check_compatible(model->spec());
  if (!models_.empty() && stats_hash != stats_hash_) {
    fail(ErrorCategory::data, "stack levels were trained with different normalization stats");
  }
  if (models_.empty()) stats_hash_ = std::move(stats_hash);
  models_.push_back(std::move(model));
  checkpoints_.emplace_back(std::nullopt);
}

const models::SequenceModel& StackedModel::model(int level) const {
  if (level < 0 || level >= level_count()) fail(ErrorCategory::invalid_argument, "no level " + std::to_string(level));
  return *models_[static_cast<std::size_t>(level)];
}

const Checkpoint& StackedModel::checkpoint(int level) const {
  model(level);
  const auto& c = checkpoints_[static_cast<std::size_t>(level)];
  if (!c) fail(ErrorCategory::invalid_argument, "level " + std::to_string(level) + " has no checkpoint");
  return *c;
}

std::vector<std::string> StackedModel::hashes() const {
  std::vector<std::string> out;
  for (const auto& c : checkpoints_) out.push_back(c ? c->hash() : std::string());
  return out;
}

Tensor StackedModel::refine(const Tensor& x, int upto) const {
  if (models_.empty()) fail(ErrorCategory::prerequisite, "empty stack");
  const int last = upto < 0 ? corrections() : std::min(upto, corrections());
  nn::NoGradGuard guard;
  Tensor y = models_.front()->forward(x);
  for (int k = 1; k <= last; ++k) y = models_[static_cast<std::size_t>(k)]->forward(y);
  return y;
}

long StackedModel::forward_count() const {
  long total = 0;
  for (const auto& m : models_) total += m->forward_count();
  return total;
}

void StackedModel::save(const std::filesystem::path& dir) const {
  json manifest{{"format", "rdstack-stack"}, {"version", 1}, {"stats_hash", stats_hash_}, {"levels", json::array()}};
  for (int k = 0; k < level_count(); ++k) {
    const Checkpoint& c = checkpoint(k);
    const std::string file = "level_" + std::to_string(k) + ".ckpt";
    models::save_checkpoint(dir / file, c);
    manifest["levels"].push_back({{"level", k}, {"file", file}, {"hash", c.hash()}});
  }
  storage::write_text(dir / kStackManifest, manifest.dump(2) + "\n");
}

StackedModel StackedModel::load(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / kStackManifest;
  if (!std::filesystem::exists(path)) fail(ErrorCategory::prerequisite, "no stack at " + dir.string());
  json manifest;
  try {
    manifest = json::parse(storage::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, path.string() + ": " + e.what());
  }
  StackedModel stack;
  for (const json& level : manifest.at("levels")) {
    Checkpoint c = models::load_checkpoint(dir / level.at("file").get<std::string>());
    if (c.hash() != level.at("hash").get<std::string>()) {
      fail(ErrorCategory::data, "checkpoint " + level.at("file").get<std::string>() + " does not match its recorded hash");
    }
    stack.add_level(std::move(c));
  }
  return stack;
}

LevelDataset build_level_dataset(const Predictor& predict, int level, const SampleSet& level0_samples) {
  if (level < 1) fail(ErrorCategory::invalid_argument, "level datasets start at level 1");
  LevelDataset out;
  out.level = level;
  SampleSet& p = out.pairs;
  p.height = level0_samples.height;
  p.width = level0_samples.width;
  p.input_channels = 4;
  p.input_steps = level0_samples.output_steps;
  p.output_steps = level0_samples.output_steps;
  for (const Sample& s : level0_samples.samples) {
    std::vector<double> pred = predict(s);
    if (pred.size() != s.target.size()) fail(ErrorCategory::shape_mismatch, "predictor output has the wrong size");
    p.samples.push_back({s.sim_id, s.anchor, std::move(pred), s.target});
  }
  return out;
}

LevelDataset build_level_dataset(const StackedModel& prefix, const SampleSet& level0_samples) {
  if (prefix.level_count() == 0) fail(ErrorCategory::prerequisite, "empty stack prefix");
  const Predictor predict = [&](const Sample& s) {
    const Tensor y = prefix.refine(Tensor::from(level0_samples.input_shape(1), s.input));
    return std::vector<double>(y.data().begin(), y.data().end());
  };
  return build_level_dataset(predict, prefix.level_count(), level0_samples);
}

InputAffine correction_input_affine(const features::NormStats& stats) {
  if (!stats.fitted) fail(ErrorCategory::prerequisite, "normalization stats are not fitted");
  InputAffine a;
  for (int c = 0; c < 4; ++c) {
    const double span = stats.out_max[c] - stats.out_min[c];
    if (stats.standardized[c]) {
      a.scale.push_back(span / stats.stddev[c]);
      a.offset.push_back((stats.out_min[c] - stats.mean[c]) / stats.stddev[c]);
    } else {
      a.scale.push_back(span);
      a.offset.push_back(stats.out_min[c]);
    }
  }
  return a;
}

Checkpoint train_correction_level(int k, const LevelDataset& train, const LevelDataset& validation,
                                  const ModelSpec& level0_spec, const TrainConfig& cfg,
                                  const features::NormStats& stats) {
  if (k < 1) fail(ErrorCategory::invalid_argument, "correction levels start at 1");
  if (train.level != k || (!validation.pairs.empty() && validation.level != k)) {
    fail(ErrorCategory::invalid_argument, "level dataset was built for level " + std::to_string(train.level) +
                                              ", not " + std::to_string(k));
  }
  return train_network(correction_spec(level0_spec), k, train.pairs, validation.pairs, cfg, stats.hash(),
                       correction_input_affine(stats));
}

double mean_pair_mse(const SampleSet& pairs) {
  if (pairs.empty()) fail(ErrorCategory::data, "no pairs");
  double total = 0.0;
  for (const Sample& s : pairs.samples) {
    if (s.input.size() != s.target.size()) fail(ErrorCategory::shape_mismatch, "pair sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.input.size(); ++i) acc += (s.input[i] - s.target[i]) * (s.input[i] - s.target[i]);
    total += acc / static_cast<double>(s.input.size());
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace rdstack
