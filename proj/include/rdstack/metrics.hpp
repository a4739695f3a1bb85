#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"
#include "rdstack/rollout.hpp"

namespace rdstack {

/// Pearson correlation over all pixels; empty when either map is constant.
std::optional<double> pcc(const StateMap& pred, const StateMap& truth);
double mse_map(const StateMap& pred, const StateMap& truth);
/// pred - truth, pixelwise.
StateMap difference_map(const StateMap& pred, const StateMap& truth);

enum class Metric { pcc, mse };
std::string_view metric_name(Metric metric) noexcept;

struct MetricCurve {
  Channel channel = Channel::C;
  Metric metric = Metric::pcc;
  std::vector<int> steps;
  /// Sample mean per step; NaN where no sample had a defined value.
  std::vector<double> values;
  std::vector<int> counts;

  /// "step,value,count" rows; undefined values are written as "nan".
  std::string to_csv() const;
};

/// Per channel and predicted step, the metric computed per sample and
/// averaged over samples. One curve per (physical channel, metric).
std::vector<MetricCurve> curves(std::span<const RolloutResult> results, std::span<const Simulation> truths);

}  // namespace rdstack
