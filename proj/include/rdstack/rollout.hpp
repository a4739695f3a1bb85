#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"
#include "rdstack/features.hpp"
#include "rdstack/stacking.hpp"

namespace rdstack {

/// floor(N / n) - 1; requires N >= 2n.
int num_iterations(int total_steps, int n);

/// Maps m physical states to the next n physical states.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual int m() const = 0;
  virtual int n() const = 0;
  virtual std::vector<State> forecast(std::span<const State> window) = 0;
};

/// Normalizes the window (recomputing engineered channels), runs the stack
/// and denormalizes its output. Records the wall-clock time of every call.
class StackForecaster final : public Forecaster {
 public:
  StackForecaster(const StackedModel& stack, features::NormStats stats, int upto_level = -1);

  int m() const override;
  int n() const override;
  std::vector<State> forecast(std::span<const State> window) override;

  /// Milliseconds per forecast() call.
  const std::vector<double>& call_ms() const noexcept { return call_ms_; }

 private:
  const StackedModel& stack_;
  features::NormStats stats_;
  features::FeatureSet set_;
  int upto_;
  std::vector<double> call_ms_;
};

enum class Provenance { ground_truth, predicted };

struct RolloutResult {
  /// Steps 0 .. m + iterations * n - 1 with the physical channels.
  Simulation trajectory;
  std::vector<Provenance> provenance;
  /// First predicted step of each iteration.
  std::vector<int> anchors;
  int m = 0;
  int n = 0;
  double seconds = 0.0;
  std::vector<double> forecast_ms;

  int first_predicted() const noexcept { return m; }
  int steps() const noexcept { return trajectory.steps(); }
};

/// Seeds with the first m true states, then repeatedly forecasts n states
/// from the latest m, exactly num_iterations(N, n) times.
RolloutResult rollout(Forecaster& forecaster, const Simulation& sim);
RolloutResult rollout(const StackedModel& stack, const Simulation& sim, const features::NormStats& stats,
                      int upto_level = -1);

/// Native simulation directory plus provenance.json.
void write_rollout(const std::filesystem::path& dir, const RolloutResult& result, bool overwrite = false);
RolloutResult read_rollout(const std::filesystem::path& dir);

}  // namespace rdstack
