#include "rdstack/rollout.hpp"

#include <algorithm>
#include <chrono>

#include <json.hpp>

#include "rdstack/error.hpp"
#include "rdstack/nn/ops.hpp"
#include "rdstack/storage.hpp"

namespace rdstack {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

int num_iterations(int total_steps, int n) {
  if (n < 1) fail(ErrorCategory::invalid_argument, "n must be positive");
  if (total_steps < 2 * n) {
    fail(ErrorCategory::invalid_argument, "rollout needs N >= 2n, got N=" + std::to_string(total_steps) +
                                              ", n=" + std::to_string(n));
  }
  return total_steps / n - 1;
}

StackForecaster::StackForecaster(const StackedModel& stack, features::NormStats stats, int upto_level)
    : stack_(stack), stats_(std::move(stats)), upto_(upto_level) {
  if (stack_.level_count() == 0) fail(ErrorCategory::prerequisite, "empty stack");
  if (stats_.hash() != stack_.stats_hash()) {
    fail(ErrorCategory::data, "normalization stats " + stats_.hash() + " differ from the stack's " +
                                  stack_.stats_hash());
  }
  set_ = features::feature_set_from_count(stack_.model(0).spec().in_channels);
}

int StackForecaster::m() const { return stack_.model(0).spec().m; }
int StackForecaster::n() const { return stack_.model(0).spec().n; }

std::vector<State> StackForecaster::forecast(std::span<const State> window) {
  const auto t0 = Clock::now();
  if (static_cast<int>(window.size()) != m()) fail(ErrorCategory::shape_mismatch, "window length differs from m");
  const StateMap& first = window.front().front();
  const int h = first.height();
  const int w = first.width();
  const nn::Shape shape{1, m() * features::channel_count(set_), h, w};
  const nn::Tensor y = stack_.refine(nn::Tensor::from(shape, features::normalize_inputs(window, stats_, set_)), upto_);
  std::vector<State> out = features::denormalize_outputs(y.data(), n(), h, w, stats_);
  // Guards the eps range against last-ulp rounding in the affine map.
  for (State& s : out) {
    for (double& v : s[1].values()) v = std::clamp(v, 0.0, 1.0);
  }
  call_ms_.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  return out;
}

RolloutResult rollout(Forecaster& forecaster, const Simulation& sim) {
  const int m = forecaster.m();
  const int n = forecaster.n();
  if (m != n) fail(ErrorCategory::invalid_argument, "iterative rollout needs m == n");
  const int iterations = num_iterations(sim.steps(), n);

  const auto t0 = Clock::now();
  RolloutResult r;
  r.m = m;
  r.n = n;
  r.trajectory.id = sim.id;
  r.trajectory.dt_index = sim.dt_index;
  for (int s = 0; s < m; ++s) {
    State state;
    for (Channel c : kPhysicalChannels) state.push_back(sim.map(s, c));
    r.trajectory.states.push_back(std::move(state));
    r.provenance.push_back(Provenance::ground_truth);
  }
  for (int it = 0; it < iterations; ++it) {
    const auto begin = r.trajectory.states.end() - m;
    const std::vector<State> window(begin, r.trajectory.states.end());
    std::vector<State> next = forecaster.forecast(window);
    if (static_cast<int>(next.size()) != n) fail(ErrorCategory::shape_mismatch, "forecaster returned wrong step count");
    r.anchors.push_back(r.trajectory.steps());
    for (State& s : next) {
      r.trajectory.states.push_back(std::move(s));
      r.provenance.push_back(Provenance::predicted);
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

RolloutResult rollout(const StackedModel& stack, const Simulation& sim, const features::NormStats& stats,
                      int upto_level) {
  StackForecaster f(stack, stats, upto_level);
  RolloutResult r = rollout(f, sim);
  r.forecast_ms = f.call_ms();
  return r;
}

void write_rollout(const std::filesystem::path& dir, const RolloutResult& result, bool overwrite) {
  storage::write_simulation(dir, result.trajectory, overwrite);
  json p{{"m", result.m},
         {"n", result.n},
         {"anchors", result.anchors},
         {"seconds", result.seconds},
         {"forecast_ms", result.forecast_ms},
         {"provenance", json::array()}};
  for (Provenance v : result.provenance) p["provenance"].push_back(v == Provenance::ground_truth ? "truth" : "predicted");
  storage::write_text(dir / "provenance.json", p.dump(2) + "\n");
}

RolloutResult read_rollout(const std::filesystem::path& dir) {
  RolloutResult r;
  r.trajectory = storage::read_simulation(dir);
  json p;
  try {
    p = json::parse(storage::read_text(dir / "provenance.json"));
  } catch (const json::exception& e) {
    fail(ErrorCategory::data, (dir / "provenance.json").string() + ": " + e.what());
  }
  r.m = p.at("m").get<int>();
  r.n = p.at("n").get<int>();
  r.anchors = p.at("anchors").get<std::vector<int>>();
  r.seconds = p.at("seconds").get<double>();
  r.forecast_ms = p.at("forecast_ms").get<std::vector<double>>();
  for (const json& v : p.at("provenance")) {
    r.provenance.push_back(v.get<std::string>() == "truth" ? Provenance::ground_truth : Provenance::predicted);
  }
  if (static_cast<int>(r.provenance.size()) != r.trajectory.steps()) {
    fail(ErrorCategory::data, "provenance length differs from trajectory length in " + dir.string());
  }
  return r;
}

}  // namespace rdstack
