#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "rdstack/error.hpp"
#include "rdstack/experiment.hpp"
#include "rdstack/storage.hpp"
#include "support.hpp"

using namespace rdstack;
using namespace rdstack::experiment;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.simulations = 3;
  cfg.train_count = 2;
  cfg.synth.height = 16;
  cfg.synth.width = 16;
  cfg.synth.steps = 10;
  cfg.family = "ufno";
  cfg.m = 2;
  cfg.n = 2;
  cfg.levels = 1;
  cfg.training.epochs = 2;
  models::ModelSpec& s = cfg.specs.at("ufno");
  s.hidden = 4;
  s.modes = 3;
  s.fourier_layers = 1;
  s.ufourier_layers = 1;
  return cfg;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RDSTACK_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config round-trip and validation") {
  ExperimentConfig cfg = tiny();
  cfg.seed = 77;
  cfg.features = 4;
  cfg.training.beta2 = 0.98;
  CHECK(ExperimentConfig::from_json(cfg.to_json()) == cfg);
  const ExperimentConfig defaults;
  CHECK(defaults.training.learning_rate == 5e-4);
  CHECK(defaults.training.epochs == 100);
  CHECK(defaults.m == 5);
  CHECK(defaults.n == 5);
  CHECK(defaults.features == 7);
  CHECK(ExperimentConfig::from_json("{}") == defaults);

  auto category = [](const std::string& text) {
    try {
      ExperimentConfig::from_json(text);
    } catch (const Error& e) {
      return e.category();
    }
    return ErrorCategory::invalid_argument;
  };
  CHECK(category(R"({"bogus": 1})") == ErrorCategory::config);
  CHECK(category(R"({"features": 5})") == ErrorCategory::config);
  CHECK(category(R"({"m": 5, "n": 4})") == ErrorCategory::config);
  CHECK(category(R"({"device": "gpu"})") == ErrorCategory::config);
  CHECK(category(R"({"m": "five"})") == ErrorCategory::config);
  CHECK(category("not json") == ErrorCategory::config);

  const models::ModelSpec s = cfg.spec_for(models::Family::ufno);
  CHECK(s.m == 2);
  CHECK(s.in_channels == 4);
  CHECK(cfg.train_config().seed == 77);
}

TEST_CASE("lock is exclusive") {
  testing::TempDir tmp("lock");
  {
    ExperimentLock a(tmp.path());
    CHECK_THROWS_AS(ExperimentLock(tmp.path()), Error);
  }
  ExperimentLock again(tmp.path());
}

TEST_CASE("full pipeline through the library") {
  testing::TempDir tmp("pipeline");
  const fs::path root = tmp.path();
  const ExperimentConfig cfg = tiny();
  std::ostringstream log;
  const CommandOptions opt{false, &log};
  const Layout layout{root};

  CHECK_THROWS_AS(cmd_train(root, cfg, models::Family::ufno, opt), Error);
  cmd_generate(root, cfg, opt);
  const std::string first = storage::read_text(layout.data(cfg) / storage::kEnsembleIndexName);
  CHECK_THROWS_AS(cmd_generate(root, cfg, opt), Error);
  cmd_generate(root, cfg, {true, &log});
  CHECK(storage::read_text(layout.data(cfg) / storage::kEnsembleIndexName) == first);

  cmd_preprocess(root, cfg, opt);
  CHECK(fs::exists(layout.stats()));
  const models::Checkpoint c0 = cmd_train(root, cfg, models::Family::ufno, opt);
  CHECK(c0.log.size() == 2);
  CHECK_THROWS_AS(cmd_stack(root, cfg, models::Family::ufno, 2, opt), Error);
  const models::Checkpoint c1 = cmd_stack(root, cfg, models::Family::ufno, 1, opt);
  CHECK(c1.level == 1);
  CHECK(StackedModel::load(layout.stack("ufno")).hashes() == std::vector<std::string>{c0.hash(), c1.hash()});
  CHECK_THROWS_AS(cmd_stack(root, cfg, models::Family::ufno, 1, opt), Error);

  const TimingReport t = cmd_rollout(root, cfg, models::Family::ufno, 1, opt);
  CHECK(t.rollouts == 1);
  CHECK(t.levels == 1);
  CHECK(t.mean_forward_ms > 0.0);
  CHECK(t.mean_rollout_seconds > 0.0);
  CHECK(fs::exists(layout.timing("ufno")));
  CHECK(timing_table_header().find("Forward Time (ms)") != std::string::npos);

  cmd_eval(root, cfg, models::Family::ufno, opt);
  for (const char* ch : {"C", "eps", "Ux", "Uy"}) {
    CAPTURE(ch);
    CHECK(fs::exists(layout.eval("ufno", 0) / (std::string("pcc_") + ch + ".csv")));
    CHECK(fs::exists(layout.eval("ufno", 1) / (std::string("mse_") + ch + ".csv")));
  }
  cmd_bulk(root, cfg, models::Family::ufno, opt);
  CHECK(fs::exists(layout.bulk("ufno") / "porosity_rmse.csv"));

  const std::string report = cmd_report(root, cfg, opt);
  CHECK(report.find("ufno level 0") != std::string::npos);
  CHECK(report.find("ufno level 1") != std::string::npos);
  CHECK(report.find("gap: no data at steps 15 25") != std::string::npos);
  CHECK(report.find("10^3 to 10^4") != std::string::npos);
  CHECK(cmd_report(root, cfg, opt) == report);
  CHECK(storage::read_text(layout.report()) == report);
}

TEST_CASE("command line exit codes") {
  testing::TempDir tmp("cli");
  const fs::path exp = tmp.path() / "exp";
  const fs::path log = tmp.path() / "log.txt";
  const std::string at = " --exp '" + exp.string() + "'";

  CHECK(run_cli("", log) == exit_code(ErrorCategory::invalid_argument));
  CHECK(run_cli("frobnicate", log) == exit_code(ErrorCategory::invalid_argument));
  CHECK(run_cli("generate --features 5" + at, log) == exit_code(ErrorCategory::invalid_argument));
  CHECK(run_cli("train --family ufno" + at, log) == exit_code(ErrorCategory::prerequisite));
  CHECK(storage::read_text(log).rfind("error: prerequisite: ", 0) == 0);
  CHECK(run_cli("generate --device gpu" + at, log) == exit_code(ErrorCategory::config));
  CHECK(run_cli("train --family nope" + at, log) != 0);

  storage::write_text(tmp.path() / "bad.json", R"({"unknown_key": 3})");
  CHECK(run_cli("generate --config '" + (tmp.path() / "bad.json").string() + "'" + at, log) ==
        exit_code(ErrorCategory::config));

  ExperimentConfig cfg = tiny();
  cfg.simulations = 2;
  cfg.train_count = 1;
  storage::write_text(tmp.path() / "tiny.json", cfg.to_json());
  const std::string with = " --quiet --config '" + (tmp.path() / "tiny.json").string() + "'" + at;
  CHECK(run_cli("generate" + with, log) == 0);
  CHECK(run_cli("generate" + with, log) == exit_code(ErrorCategory::prerequisite));
  CHECK(run_cli("generate --overwrite" + with, log) == 0);
  CHECK(fs::exists(exp / "config.json"));
  CHECK_FALSE(fs::exists(exp / ".lock"));
  CHECK(run_cli("preprocess" + at, log) == 0);

  ExperimentLock held(exp);
  CHECK(run_cli("preprocess" + at, log) == exit_code(ErrorCategory::prerequisite));
}
