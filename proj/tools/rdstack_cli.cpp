#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rdstack/error.hpp"
#include "rdstack/experiment.hpp"
#include "rdstack/storage.hpp"

namespace fs = std::filesystem;
using namespace rdstack;
using namespace rdstack::experiment;

namespace {

struct Common {
  std::string exp = ".";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> device;
  std::optional<int> features;
  std::optional<int> levels;
  std::optional<int> epochs;
  bool overwrite = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--exp", c.exp, "Experiment directory")->capture_default_str();
  cmd->add_option("--config", c.config, "Config file (default: <exp>/config.json)");
  cmd->add_option("--seed", c.seed, "Seed for splits, initialization and batching");
  cmd->add_option("--device", c.device, "Compute device (cpu)");
  cmd->add_option("--features", c.features, "Input channels: 4 or 7")->check(CLI::IsMember({4, 7}));
  cmd->add_option("--levels", c.levels, "Number of correction levels L")->check(CLI::NonNegativeNumber);
  cmd->add_option("--epochs", c.epochs, "Maximum training epochs")->check(CLI::PositiveNumber);
  cmd->add_flag("--overwrite", c.overwrite, "Replace existing outputs");
  cmd->add_flag("--quiet", c.quiet, "Only print errors");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? load_config(c.exp)
                                          : ExperimentConfig::from_json(storage::read_text(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (c.device) cfg.device = *c.device;
  if (c.features) cfg.features = *c.features;
  if (c.levels) cfg.levels = *c.levels;
  if (c.epochs) cfg.training.epochs = *c.epochs;
  cfg.validate();
  return cfg;
}

CommandOptions options(const Common& c) { return {c.overwrite, c.quiet ? nullptr : &std::cout}; }

/// Stores the resolved config so later commands see the same settings.
void remember(const Common& c, const ExperimentConfig& cfg) {
  const ExperimentConfig stored = load_config(c.exp);
  if (!(stored == cfg) || !fs::exists(Layout{c.exp}.config())) save_config(c.exp, cfg);
}

models::Family family_of(const std::string& name, const ExperimentConfig& cfg) {
  return models::family_from_name(name.empty() ? cfg.family : name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacked surrogates for reactive dissolution"};
  app.require_subcommand(1);

  Common common;
  std::string family;
  int level = 1;
  std::string source;
  std::optional<int> count;
  std::optional<int> train_count;
  std::optional<int> crop_h, crop_w;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic ensemble");
  add_common(gen, common);
  gen->add_option("--count", count, "Number of simulations")->check(CLI::Range(2, 100000));
  gen->add_option("--train-count", train_count, "Simulations in the training split");

  auto* imp = app.add_subcommand("import", "Import an external ensemble described by import.json");
  add_common(imp, common);
  imp->add_option("--source", source, "Directory holding import.json")->required();
  imp->add_option("--crop-h", crop_h, "Crop height")->check(CLI::PositiveNumber);
  imp->add_option("--crop-w", crop_w, "Crop width")->check(CLI::PositiveNumber);

  auto* pre = app.add_subcommand("preprocess", "Validate data and fit normalization stats");
  add_common(pre, common);

  auto* train = app.add_subcommand("train", "Train level 0");
  add_common(train, common);
  train->add_option("--family", family, "convlstm, ufno or tau");

  auto* stack = app.add_subcommand("stack", "Train correction levels");
  add_common(stack, common);
  stack->add_option("--family", family, "convlstm, ufno or tau");
  stack->add_option("--level", level, "Train only this level (default: all up to --levels)")->check(CLI::PositiveNumber);

  auto* roll = app.add_subcommand("rollout", "Roll out validation simulations");
  add_common(roll, common);
  roll->add_option("--family", family, "convlstm, ufno or tau");

  auto* eval = app.add_subcommand("eval", "Metric curves and plots");
  add_common(eval, common);
  eval->add_option("--family", family, "convlstm, ufno or tau");

  auto* bulk = app.add_subcommand("bulk", "Porosity and permeability series");
  add_common(bulk, common);
  bulk->add_option("--family", family, "convlstm, ufno or tau");

  auto* report = app.add_subcommand("report", "Summary document");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCategory::invalid_argument);
  }

  try {
    ExperimentConfig cfg = resolve(common);
    resolve_device(cfg.device);
    if (count) cfg.simulations = *count;
    if (train_count) cfg.train_count = *train_count;
    if (imp->parsed()) {
      cfg.import_source = fs::absolute(source).string();
      if (crop_h) cfg.crop_h = *crop_h;
      if (crop_w) cfg.crop_w = *crop_w;
    }
    cfg.validate();

    fs::create_directories(common.exp);
    ExperimentLock lock(common.exp);
    const CommandOptions opt = options(common);

    if (gen->parsed()) {
      remember(common, cfg);
      cmd_generate(common.exp, cfg, opt);
    } else if (imp->parsed()) {
      remember(common, cfg);
      cmd_import(common.exp, cfg, opt);
    } else if (pre->parsed()) {
      cmd_preprocess(common.exp, cfg, opt);
    } else if (train->parsed()) {
      remember(common, cfg);
      cmd_train(common.exp, cfg, family_of(family, cfg), opt);
    } else if (stack->parsed()) {
      const models::Family f = family_of(family, cfg);
      if (stack->count("--level") > 0) {
        cmd_stack(common.exp, cfg, f, level, opt);
      } else {
        for (int k = 1; k <= cfg.levels; ++k) cmd_stack(common.exp, cfg, f, k, opt);
      }
    } else if (roll->parsed()) {
      cmd_rollout(common.exp, cfg, family_of(family, cfg), cfg.levels, opt);
    } else if (eval->parsed()) {
      cmd_eval(common.exp, cfg, family_of(family, cfg), opt);
    } else if (bulk->parsed()) {
      cmd_bulk(common.exp, cfg, family_of(family, cfg), opt);
    } else if (report->parsed()) {
      cmd_report(common.exp, cfg, opt);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << category_name(ErrorCategory::io) << ": " << e.what() << "\n";
    return exit_code(ErrorCategory::io);
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
