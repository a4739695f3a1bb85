#include "rdstack/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rdstack/bulk.hpp"
#include "rdstack/error.hpp"
#include "rdstack/features.hpp"
#include "rdstack/metrics.hpp"
#include "rdstack/plot.hpp"
#include "rdstack/rollout.hpp"
#include "rdstack/storage.hpp"

namespace rdstack::experiment {

using nlohmann::json;
using models::Family;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, what + ": " + e.what());
  }
}

std::ostream& out(const CommandOptions& opt) {
  static std::ostream discard(nullptr);
  return opt.log ? *opt.log : discard;
}

void refuse_existing(const fs::path& path, const CommandOptions& opt) {
  if (fs::exists(path) && !opt.overwrite) {
    fail(ErrorCategory::prerequisite, path.string() + " already exists; pass --overwrite to replace it");
  }
}

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) fail(ErrorCategory::prerequisite, "missing " + path.string() + " (run '" + hint + "' first)");
}

features::NormStats load_stats(const Layout& layout) {
  require_file(layout.stats(), "preprocess");
  return features::NormStats::from_json(storage::read_text(layout.stats()));
}

Ensemble load_data(const Layout& layout, const ExperimentConfig& cfg) {
  const fs::path dir = layout.data(cfg);
  require_file(dir / storage::kEnsembleIndexName, "generate' or 'import");
  return storage::read_ensemble(dir);
}

std::string family_dir(Family family) { return std::string(models::family_name(family)); }

void write_training_log(const fs::path& path, const models::Checkpoint& c) {
  std::ostringstream s;
  s.precision(10);
  s << "epoch,train_loss,validation_loss,seconds\n";
  for (const auto& r : c.log) s << r.epoch << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.seconds << '\n';
  storage::write_text(path, s.str());
}

TrainConfig logging_config(const ExperimentConfig& cfg, const CommandOptions& opt, int level) {
  TrainConfig t = cfg.train_config();
  std::ostream* log = opt.log;
  t.on_epoch = [log, level](const models::EpochRecord& r) {
    if (!log) return;
    *log << "level " << level << " epoch " << r.epoch << " train " << std::setprecision(6) << r.train_loss
         << " validation " << r.validation_loss << " (" << std::setprecision(3) << r.seconds << " s)\n";
  };
  return t;
}

std::vector<int> rolled_levels(const Layout& layout, const std::string& family) {
  std::vector<int> levels;
  const fs::path base = layout.root / "rollouts" / family;
  if (!fs::exists(base)) return levels;
  for (const auto& entry : fs::directory_iterator(base)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.size() > 5 && name.rfind("level", 0) == 0) levels.push_back(std::stoi(name.substr(5)));
  }
  std::sort(levels.begin(), levels.end());
  return levels;
}

std::vector<RolloutResult> load_rollouts(const fs::path& dir, std::vector<std::string>& ids) {
  std::vector<RolloutResult> results;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& d : dirs) {
    results.push_back(read_rollout(d));
    ids.push_back(results.back().trajectory.id);
  }
  return results;
}

const Simulation& find_sim(const Ensemble& ens, const std::string& id) {
  for (const Simulation& s : ens.simulations) {
    if (s.id == id) return s;
  }
  fail(ErrorCategory::data, "simulation " + id + " is not in the ensemble");
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (Family f : {Family::convlstm, Family::ufno, Family::tau}) {
    specs[std::string(models::family_name(f))] = models::ModelSpec::defaults(f);
  }
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCategory::config, "experiment config: " + what);
  };
  require(simulations >= 2, "simulations must be at least 2");
  require(train_count > 0 && train_count < simulations, "train_count must lie in (0, simulations)");
  require(m >= 1 && n >= 1 && m == n, "m and n must be positive and equal");
  require(levels >= 0, "levels must be non-negative");
  require(features == 4 || features == 7, "features must be 4 or 7");
  require(training.batch_size >= 1 && training.epochs >= 1 && training.patience >= 1, "training counts must be positive");
  require(training.learning_rate > 0.0, "learning rate must be positive");
  require(crop_h >= 0 && crop_w >= 0, "crop sizes must be non-negative");
  models::family_from_name(family);
  for (const auto& [name, spec] : specs) {
    require(models::family_name(spec.family) == name, "spec '" + name + "' has family " +
                                                          std::string(models::family_name(spec.family)));
  }
  synth.validate();
  resolve_device(device);
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["data_dir"] = data_dir;
  j["simulations"] = simulations;
  j["train_count"] = train_count;
  j["synth"] = json::parse(synth.to_json());
  j["import_source"] = import_source;
  j["crop_h"] = crop_h;
  j["crop_w"] = crop_w;
  j["family"] = family;
  j["specs"] = json::object();
  for (const auto& [name, spec] : specs) j["specs"][name] = json::parse(spec.to_json());
  j["training"] = {{"learning_rate", training.learning_rate}, {"beta1", training.beta1},
                   {"beta2", training.beta2},                 {"batch_size", training.batch_size},
                   {"epochs", training.epochs},               {"patience", training.patience}};
  j["m"] = m;
  j["n"] = n;
  j["levels"] = levels;
  j["features"] = features;
  j["seed"] = seed;
  j["device"] = device;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  const json j = parse_json(text, "experiment config");
  static const std::set<std::string> known{"data_dir", "simulations", "train_count", "synth",    "import_source",
                                           "crop_h",   "crop_w",      "family",      "specs",    "training",
                                           "m",        "n",           "levels",      "features", "seed",
                                           "device"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) fail(ErrorCategory::config, "experiment config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.data_dir = j.value("data_dir", c.data_dir);
    c.simulations = j.value("simulations", c.simulations);
    c.train_count = j.value("train_count", c.train_count);
    if (j.contains("synth")) c.synth = synth::SynthConfig::from_json(j.at("synth").dump());
    c.import_source = j.value("import_source", c.import_source);
    c.crop_h = j.value("crop_h", c.crop_h);
    c.crop_w = j.value("crop_w", c.crop_w);
    c.family = j.value("family", c.family);
    if (j.contains("specs")) {
      for (const auto& [name, spec] : j.at("specs").items()) {
        json full = spec;
        if (!full.contains("family")) full["family"] = name;
        c.specs[name] = models::ModelSpec::from_json(full.dump());
      }
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
      c.training.beta1 = t.value("beta1", c.training.beta1);
      c.training.beta2 = t.value("beta2", c.training.beta2);
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.patience = t.value("patience", c.training.patience);
    }
    c.m = j.value("m", c.m);
    c.n = j.value("n", c.n);
    c.levels = j.value("levels", c.levels);
    c.features = j.value("features", c.features);
    c.seed = j.value("seed", c.seed);
    c.device = j.value("device", c.device);
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

models::ModelSpec ExperimentConfig::spec_for(Family f) const {
  const auto it = specs.find(std::string(models::family_name(f)));
  models::ModelSpec s = it != specs.end() ? it->second : models::ModelSpec::defaults(f);
  s.m = m;
  s.n = n;
  s.in_channels = features;
  s.validate();
  return s;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = training.learning_rate;
  t.beta1 = training.beta1;
  t.beta2 = training.beta2;
  t.batch_size = training.batch_size;
  t.max_epochs = training.epochs;
  t.patience = training.patience;
  t.seed = seed;
  return t;
}

std::string resolve_device(const std::string& configured) {
  std::string device = configured;
  if (const char* env = std::getenv("RDSTACK_DEVICE"); env && *env) device = env;
  if (device != "cpu") fail(ErrorCategory::config, "device '" + device + "' is not available; only 'cpu' is supported");
  return device;
}

fs::path Layout::data(const ExperimentConfig& cfg) const {
  const fs::path p(cfg.data_dir);
  return p.is_absolute() ? p : root / p;
}

fs::path Layout::rollouts(const std::string& family, int level) const {
  return root / "rollouts" / family / ("level" + std::to_string(level));
}

fs::path Layout::eval(const std::string& family, int level) const {
  return root / "eval" / family / ("level" + std::to_string(level));
}

ExperimentLock::ExperimentLock(const fs::path& root) : path_(root / ".lock") {
  fs::create_directories(root);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    fail(ErrorCategory::prerequisite, "experiment " + root.string() + " is locked by another command (" +
                                          path_.string() + ")");
  }
  std::fclose(f);
}

ExperimentLock::~ExperimentLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

ExperimentConfig load_config(const fs::path& root) {
  const fs::path path = Layout{root}.config();
  if (!fs::exists(path)) return ExperimentConfig{};
  return ExperimentConfig::from_json(storage::read_text(path));
}

void save_config(const fs::path& root, const ExperimentConfig& cfg) {
  cfg.validate();
  storage::write_text(Layout{root}.config(), cfg.to_json());
}

void cmd_generate(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const fs::path dir = layout.data(cfg);
  refuse_existing(dir / storage::kEnsembleIndexName, opt);

  Ensemble ens;
  json timing = json::object();
  for (int i = 0; i < cfg.simulations; ++i) {
    synth::SynthConfig sc = cfg.synth;
    sc.seed = cfg.synth.seed + static_cast<std::uint64_t>(i);
    char id[32];
    std::snprintf(id, sizeof id, "sim_%03d", i);
    const auto t0 = std::chrono::steady_clock::now();
    ens.simulations.push_back(synth::generate_simulation(sc, id));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing[id] = seconds;
    out(opt) << "generated " << id << " (" << sc.height << "x" << sc.width << "x" << sc.steps << ", "
             << std::setprecision(3) << seconds << " s)\n";
  }
  ens = split_ensemble(std::move(ens), cfg.train_count, cfg.seed);
  storage::write_ensemble(dir, ens, opt.overwrite);
  storage::write_text(layout.generation(), json{{"solver_seconds", timing}}.dump(2) + "\n");
}

void cmd_import(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  if (cfg.import_source.empty()) fail(ErrorCategory::config, "import_source is not set");
  const Layout layout{root};
  storage::ImportOptions io;
  if (cfg.crop_h > 0) io.crop_h = cfg.crop_h;
  if (cfg.crop_w > 0) io.crop_w = cfg.crop_w;
  io.overwrite = opt.overwrite;
  refuse_existing(layout.data(cfg) / storage::kEnsembleIndexName, opt);
  const Ensemble ens = storage::import_ensemble(cfg.import_source, layout.data(cfg), io);
  out(opt) << "imported " << ens.simulations.size() << " simulations\n";
}

void cmd_preprocess(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const Ensemble ens = load_data(layout, cfg);
  refuse_existing(layout.stats(), opt);
  for (const Simulation& sim : ens.simulations) {
    const ValidationReport report = validate_simulation(sim);
    if (!report.ok()) fail(ErrorCategory::data, "simulation " + sim.id + " is invalid:\n" + report.summary());
    if (sim.steps() < cfg.m + cfg.n) {
      fail(ErrorCategory::data, "simulation " + sim.id + " has " + std::to_string(sim.steps()) + " steps, needs " +
                                    std::to_string(cfg.m + cfg.n));
    }
  }
  const auto train = ens.members(Split::train);
  const features::NormStats stats = features::fit_norm_stats(std::span<const Simulation* const>(train));
  storage::write_text(layout.stats(), stats.to_json());
  out(opt) << "fitted stats on " << train.size() << " training simulations (hash " << stats.hash() << ")\n";
}

models::Checkpoint cmd_train(const fs::path& root, const ExperimentConfig& cfg, Family family,
                             const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const std::string fam = family_dir(family);
  const fs::path dir = layout.stack(fam);
  refuse_existing(dir / kStackManifest, opt);
  const features::NormStats stats = load_stats(layout);
  const Ensemble ens = load_data(layout, cfg);
  const auto set = features::feature_set_from_count(cfg.features);
  const auto train_sims = ens.members(Split::train);
  const auto val_sims = ens.members(Split::validation);
  const SampleSet train = make_samples(train_sims, cfg.m, cfg.n, stats, set);
  const SampleSet val = make_samples(val_sims, cfg.m, cfg.n, stats, set);
  out(opt) << "training " << fam << " level 0 on " << train.size() << " windows\n";

  models::Checkpoint c = train_level0(cfg.spec_for(family), train, val, logging_config(cfg, opt, 0), stats.hash());
  if (opt.overwrite && fs::exists(dir)) fs::remove_all(dir);
  StackedModel stack;
  stack.add_level(c);
  stack.save(dir);
  write_training_log(dir / "training_log_level_0.csv", c);
  return c;
}

models::Checkpoint cmd_stack(const fs::path& root, const ExperimentConfig& cfg, Family family, int k,
                             const CommandOptions& opt) {
  cfg.validate();
  if (k < 1) fail(ErrorCategory::invalid_argument, "correction levels start at 1");
  const Layout layout{root};
  const std::string fam = family_dir(family);
  const fs::path dir = layout.stack(fam);
  require_file(dir / kStackManifest, "train");
  StackedModel saved = StackedModel::load(dir);
  if (saved.level_count() < k) {
    fail(ErrorCategory::prerequisite, "level " + std::to_string(k) + " needs levels 0.." + std::to_string(k - 1) +
                                          "; the stack has " + std::to_string(saved.level_count()));
  }
  if (saved.level_count() > k && !opt.overwrite) {
    fail(ErrorCategory::prerequisite, "level " + std::to_string(k) + " already exists; pass --overwrite to retrain it");
  }
  const features::NormStats stats = load_stats(layout);
  if (stats.hash() != saved.stats_hash()) {
    fail(ErrorCategory::data, "stats.json (" + stats.hash() + ") differs from the stats the stack was trained with (" +
                                  saved.stats_hash() + ")");
  }
  StackedModel prefix;
  for (int level = 0; level < k; ++level) prefix.add_level(saved.checkpoint(level));
  const std::vector<std::string> before = prefix.hashes();

  const Ensemble ens = load_data(layout, cfg);
  const auto set = features::feature_set_from_count(cfg.features);
  const auto train_sims = ens.members(Split::train);
  const auto val_sims = ens.members(Split::validation);
  const LevelDataset train = build_level_dataset(prefix, make_samples(train_sims, cfg.m, cfg.n, stats, set));
  const LevelDataset val = build_level_dataset(prefix, make_samples(val_sims, cfg.m, cfg.n, stats, set));
  out(opt) << "training " << fam << " level " << k << " on " << train.pairs.size() << " pairs (level " << k - 1
           << " training mse " << mean_pair_mse(train.pairs) << ")\n";
  models::Checkpoint c = train_correction_level(k, train, val, prefix.model(0).spec(), logging_config(cfg, opt, k),
                                                stats);
  if (prefix.hashes() != before) fail(ErrorCategory::numerical, "a frozen level changed during training");

  prefix.add_level(c);
  for (int level = k + 1; level < saved.level_count(); ++level) {
    fs::remove(dir / ("level_" + std::to_string(level) + ".ckpt"));
    fs::remove(dir / ("training_log_level_" + std::to_string(level) + ".csv"));
  }
  prefix.save(dir);
  write_training_log(dir / ("training_log_level_" + std::to_string(k) + ".csv"), c);
  return c;
}

std::string timing_table_header() {
  return "| Model | Levels | Parameters | Forward Time (ms) | Rollout Time (s) | Solver Time (s) | Speedup |\n"
         "|---|---|---|---|---|---|---|\n";
}

std::string TimingReport::table_row() const {
  std::ostringstream s;
  s << std::fixed;
  s << "| " << family << " | " << levels << " | " << parameters << " | " << std::setprecision(3) << mean_forward_ms
    << " | " << std::setprecision(4) << mean_rollout_seconds << " | ";
  if (solver_seconds > 0.0) {
    s << std::setprecision(4) << solver_seconds << " | " << std::setprecision(1)
      << solver_seconds / std::max(mean_rollout_seconds, 1e-12) << "x |";
  } else {
    s << "n/a | n/a |";
  }
  return s.str();
}

TimingReport cmd_rollout(const fs::path& root, const ExperimentConfig& cfg, Family family, int levels,
                         const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const std::string fam = family_dir(family);
  require_file(layout.stack(fam) / kStackManifest, "train");
  const StackedModel stack = StackedModel::load(layout.stack(fam));
  if (levels < 0 || levels > stack.corrections()) {
    fail(ErrorCategory::prerequisite, "requested " + std::to_string(levels) + " correction levels, the stack has " +
                                          std::to_string(stack.corrections()));
  }
  const features::NormStats stats = load_stats(layout);
  const Ensemble ens = load_data(layout, cfg);
  const auto sims = ens.members(Split::validation);
  for (int level = 0; level <= levels; ++level) refuse_existing(layout.rollouts(fam, level), opt);

  TimingReport report;
  report.family = fam;
  report.levels = levels;
  for (int level = 0; level <= levels; ++level) report.parameters += stack.model(level).parameters().parameter_count();

  double forward_total = 0.0;
  std::size_t forward_calls = 0;
  double rollout_total = 0.0;
  for (int level = 0; level <= levels; ++level) {
    const fs::path dir = layout.rollouts(fam, level);
    if (fs::exists(dir)) fs::remove_all(dir);
    for (const Simulation* sim : sims) {
      const RolloutResult r = rollout(stack, *sim, stats, level);
      write_rollout(dir / sim->id, r);
      if (level == levels) {
        for (double ms : r.forecast_ms) forward_total += ms;
        forward_calls += r.forecast_ms.size();
        rollout_total += r.seconds;
        ++report.rollouts;
      }
      out(opt) << fam << " level " << level << " " << sim->id << ": " << r.anchors.size() << " iterations, "
               << std::setprecision(3) << r.seconds << " s\n";
    }
  }
  report.mean_forward_ms = forward_calls ? forward_total / static_cast<double>(forward_calls) : 0.0;
  report.mean_rollout_seconds = report.rollouts ? rollout_total / report.rollouts : 0.0;

  if (fs::exists(layout.generation())) {
    const json g = parse_json(storage::read_text(layout.generation()), "generation.json");
    double total = 0.0;
    int count = 0;
    for (const Simulation* sim : sims) {
      if (g.at("solver_seconds").contains(sim->id)) {
        total += g.at("solver_seconds").at(sim->id).get<double>();
        ++count;
      }
    }
    if (count > 0) report.solver_seconds = total / count;
  }

  json j{{"family", report.family},
         {"levels", report.levels},
         {"parameters", report.parameters},
         {"mean_forward_ms", report.mean_forward_ms},
         {"mean_rollout_seconds", report.mean_rollout_seconds},
         {"rollouts", report.rollouts},
         {"solver_seconds", report.solver_seconds}};
  storage::write_text(layout.timing(fam), j.dump(2) + "\n");
  out(opt) << timing_table_header() << report.table_row() << "\n";
  return report;
}

void cmd_eval(const fs::path& root, const ExperimentConfig& cfg, Family family, const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const std::string fam = family_dir(family);
  const std::vector<int> levels = rolled_levels(layout, fam);
  if (levels.empty()) fail(ErrorCategory::prerequisite, "no rollouts for " + fam + " (run 'rollout' first)");
  const Ensemble ens = load_data(layout, cfg);
  for (int level : levels) refuse_existing(layout.eval(fam, level), opt);

  std::map<std::string, plot::Chart> charts;
  for (int level : levels) {
    std::vector<std::string> ids;
    const std::vector<RolloutResult> results = load_rollouts(layout.rollouts(fam, level), ids);
    std::vector<Simulation> truths;
    for (const std::string& id : ids) truths.push_back(find_sim(ens, id));
    const fs::path dir = layout.eval(fam, level);
    for (const MetricCurve& c : curves(results, truths)) {
      const std::string key = std::string(metric_name(c.metric)) + "_" + std::string(channel_name(c.channel));
      storage::write_text(dir / (key + ".csv"), c.to_csv());
      plot::Chart& chart = charts[key];
      chart.title = fam + " " + std::string(metric_name(c.metric)) + " of " + std::string(channel_name(c.channel));
      chart.x_label = "time step";
      chart.y_label = c.metric == Metric::pcc ? "mean PCC" : "mean MSE";
      if (c.metric == Metric::pcc) chart.y_lo = -1.0, chart.y_hi = 1.0;
      plot::Series s{"level " + std::to_string(level), {}, c.values};
      for (int step : c.steps) s.x.push_back(step);
      chart.series.push_back(std::move(s));
    }
  }
  for (const auto& [key, chart] : charts) plot::write_svg(root / "eval" / fam / (key + ".svg"), chart);
  out(opt) << "wrote " << charts.size() << " curve plots for " << fam << "\n";
}

void cmd_bulk(const fs::path& root, const ExperimentConfig& cfg, Family family, const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  const std::string fam = family_dir(family);
  const std::vector<int> levels = rolled_levels(layout, fam);
  if (levels.empty()) fail(ErrorCategory::prerequisite, "no rollouts for " + fam + " (run 'rollout' first)");
  const Ensemble ens = load_data(layout, cfg);
  const fs::path dir = layout.bulk(fam);
  refuse_existing(dir, opt);
  if (fs::exists(dir)) fs::remove_all(dir);

  std::map<int, std::vector<RolloutResult>> by_level;
  std::vector<std::string> ids;
  for (int level : levels) {
    std::vector<std::string> level_ids;
    by_level[level] = load_rollouts(layout.rollouts(fam, level), level_ids);
    if (ids.empty()) ids = level_ids;
    if (level_ids != ids) fail(ErrorCategory::data, "rollout levels cover different simulations");
  }
  const std::vector<int> steps = bulk_steps_within(find_sim(ens, ids.front()).steps());
  if (steps.empty()) fail(ErrorCategory::data, "trajectories are too short for any bulk sampling step");

  // [property][variant] -> per-sample series
  std::map<std::string, std::vector<std::vector<double>>> truth_rows;
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>> pred_rows;
  for (std::size_t s = 0; s < ids.size(); ++s) {
    std::map<std::string, const Simulation*> variants;
    for (int level : levels) {
      variants["level" + std::to_string(level)] = &by_level[level][s].trajectory;
    }
    const Simulation& truth = find_sim(ens, ids[s]);
    for (const BulkSeries& b : bulk_series(truth, variants, steps)) {
      const std::string prop(bulk_property_name(b.property));
      storage::write_text(dir / (prop + "_" + ids[s] + ".csv"), b.to_csv());
      truth_rows[prop].push_back(b.truth);
      for (const auto& [name, values] : b.variants) pred_rows[prop][name].push_back(values);
    }
  }
  for (const auto& [prop, truths] : truth_rows) {
    plot::Chart chart{fam + " " + prop + " RMSE", "time step", "RMSE vs truth", {}};
    std::ostringstream csv;
    csv.precision(17);
    csv << "step";
    std::map<std::string, std::vector<double>> rmse;
    for (const auto& [name, rows] : pred_rows[prop]) {
      rmse[name] = rmse_series(rows, truths);
      csv << ',' << name;
    }
    csv << '\n';
    for (std::size_t i = 0; i < steps.size(); ++i) {
      csv << steps[i];
      for (const auto& [name, values] : rmse) csv << ',' << values[i];
      csv << '\n';
    }
    for (const auto& [name, values] : rmse) {
      plot::Series s{name, {}, values};
      for (int step : steps) s.x.push_back(step);
      chart.series.push_back(std::move(s));
    }
    storage::write_text(dir / (prop + "_rmse.csv"), csv.str());
    plot::write_svg(dir / (prop + "_rmse.svg"), chart);

    plot::Chart evolution{fam + " " + prop + " of " + ids.front(), "time step", prop, {}};
    plot::Series t{"truth", {}, truths.front()};
    for (int step : steps) t.x.push_back(step);
    evolution.series.push_back(t);
    for (const auto& [name, rows] : pred_rows[prop]) evolution.series.push_back({name, t.x, rows.front()});
    plot::write_svg(dir / (prop + "_" + ids.front() + ".svg"), evolution);
  }
  out(opt) << "wrote bulk series for " << ids.size() << " simulations at " << steps.size() << " steps\n";
}

std::string cmd_report(const fs::path& root, const ExperimentConfig& cfg, const CommandOptions& opt) {
  cfg.validate();
  const Layout layout{root};
  std::ostringstream r;
  r << "# Experiment report\n\n";
  r << "Input features: " << cfg.features << "; m = " << cfg.m << ", n = " << cfg.n << "; seed " << cfg.seed << ".\n\n";

  r << "## Trained models\n\n";
  bool any = false;
  for (Family f : {Family::convlstm, Family::ufno, Family::tau}) {
    const std::string fam = family_dir(f);
    if (!fs::exists(layout.stack(fam) / kStackManifest)) continue;
    const StackedModel stack = StackedModel::load(layout.stack(fam));
    for (int level = 0; level < stack.level_count(); ++level) {
      const models::Checkpoint& c = stack.checkpoint(level);
      const double last = c.log.empty() ? 0.0 : c.log.back().train_loss;
      const double best = c.best_epoch > 0 ? c.log[static_cast<std::size_t>(c.best_epoch - 1)].validation_loss : 0.0;
      r << "- " << fam << " level " << level << ": " << c.log.size() << " epochs, best epoch " << c.best_epoch
        << ", final train loss " << last << ", best validation loss " << best << ", checkpoint " << c.hash() << "\n";
      any = true;
    }
  }
  if (!any) r << "No trained models.\n";

  r << "\n## Timing\n\n";
  std::ostringstream rows;
  for (Family f : {Family::convlstm, Family::ufno, Family::tau}) {
    const fs::path path = layout.timing(family_dir(f));
    if (!fs::exists(path)) continue;
    const json j = parse_json(storage::read_text(path), path.string());
    TimingReport t;
    t.family = j.at("family").get<std::string>();
    t.levels = j.at("levels").get<int>();
    t.parameters = j.at("parameters").get<std::size_t>();
    t.mean_forward_ms = j.at("mean_forward_ms").get<double>();
    t.mean_rollout_seconds = j.at("mean_rollout_seconds").get<double>();
    t.rollouts = j.at("rollouts").get<int>();
    t.solver_seconds = j.at("solver_seconds").get<double>();
    rows << t.table_row() << "\n";
  }
  if (rows.str().empty()) {
    r << "No rollouts timed.\n";
  } else {
    r << timing_table_header() << rows.str() << "\n";
    r << "Forward time is one stack forecast of n steps (all levels); rollout time is one full trajectory. "
         "Surrogates of this kind are typically 10^3 to 10^4 times faster than a full pore-scale solver at "
         "production grid sizes. The synthetic solver here runs in seconds, so the speedup column is only a "
         "desk-scale reference.\n";
  }

  r << "\n## Metrics\n\n";
  any = false;
  for (Family f : {Family::convlstm, Family::ufno, Family::tau}) {
    const std::string fam = family_dir(f);
    for (int level : rolled_levels(layout, fam)) {
      for (Channel c : kPhysicalChannels) {
        const fs::path path = layout.eval(fam, level) / ("pcc_" + std::string(channel_name(c)) + ".csv");
        if (!fs::exists(path)) continue;
        std::istringstream csv(storage::read_text(path));
        std::string line;
        std::getline(csv, line);
        std::string first, last;
        while (std::getline(csv, line)) {
          if (first.empty()) first = line;
          last = line;
        }
        r << "- " << fam << " level " << level << " PCC " << channel_name(c) << ": first predicted step "
          << first.substr(first.find(',') + 1, first.rfind(',') - first.find(',') - 1) << ", last "
          << last.substr(last.find(',') + 1, last.rfind(',') - last.find(',') - 1) << "\n";
        any = true;
      }
    }
  }
  if (!any) r << "No evaluated rollouts.\n";

  r << "\n## Bulk properties\n\n";
  any = false;
  for (Family f : {Family::convlstm, Family::ufno, Family::tau}) {
    const std::string fam = family_dir(f);
    const fs::path path = layout.bulk(fam) / "porosity_rmse.csv";
    if (!fs::exists(path)) continue;
    any = true;
    std::istringstream csv(storage::read_text(path));
    std::string line;
    std::getline(csv, line);
    std::set<int> present;
    while (std::getline(csv, line)) present.insert(std::stoi(line.substr(0, line.find(','))));
    r << "- " << fam << ": porosity and permeability series at steps";
    for (int s : present) r << ' ' << s;
    std::vector<int> missing;
    for (int s : default_bulk_steps()) {
      if (!present.contains(s)) missing.push_back(s);
    }
    if (!missing.empty()) {
      r << "; gap: no data at steps";
      for (int s : missing) r << ' ' << s;
    }
    r << "\n";
  }
  if (!any) r << "No bulk series.\n";
  r << "\nPermeability values come from a Darcy proxy on the porosity field and are only meaningful relative to the "
       "proxy applied to the ground truth.\n";

  const std::string text = r.str();
  storage::write_text(layout.report(), text);
  out(opt) << "wrote " << layout.report().string() << "\n";
  return text;
}

}  // namespace rdstack::experiment
