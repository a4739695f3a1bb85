#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"

namespace rdstack::features {

inline constexpr double kConcentrationFloor = 1e-10;
inline constexpr double kFilterMinConcentration = 1e-4;
inline constexpr double kFilterMinEps = 0.01;
inline constexpr double kFilterMaxEps = 0.99;

/// Pointwise sqrt(Ux^2 + Uy^2).
StateMap velocity_magnitude(const StateMap& ux, const StateMap& uy);

/// log10(max(c, floor)) mapped affinely so that log10(floor) -> 0 and log10(1) -> 1.
StateMap scaled_concentration(const StateMap& c, double floor = kConcentrationFloor);

/// 1 where C >= 1e-4 and 0.01 <= eps <= 0.99, else 0.
StateMap combined_filter(const StateMap& c, const StateMap& eps);

/// Number of model input channels: 4 physical, or 4 physical + 3 engineered.
enum class FeatureSet { physical = 4, engineered = 7 };

inline int channel_count(FeatureSet set) noexcept { return static_cast<int>(set); }
FeatureSet feature_set_from_count(int count);

/// Builds the model-input channel stack (C, eps, Ux, Uy[, U, Cscaled, Filter])
/// from any state that carries the four physical channels.
State input_channels(const State& state, FeatureSet set);

/// Per-channel normalization fitted on training simulations. Inputs are
/// standardized except for Cscaled and Filter, which are already in [0, 1];
/// targets (the four physical channels) are min-max scaled to [0, 1].
struct NormStats {
  std::array<double, 7> mean{};
  std::array<double, 7> stddev{};
  std::array<bool, 7> standardized{true, true, true, true, true, false, false};
  std::array<double, 4> out_min{};
  std::array<double, 4> out_max{};
  bool fitted = false;

  /// Fingerprint of the serialized stats; checkpoints record it.
  std::string hash() const;
  std::string to_json() const;
  static NormStats from_json(const std::string& text);

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

NormStats fit_norm_stats(std::span<const Simulation* const> train);
NormStats fit_norm_stats(std::span<const Simulation> train);

/// Layout of every model tensor: [time][channel][row][col].
/// Normalizes m input states into m * channel_count(set) planes.
std::vector<double> normalize_inputs(std::span<const State> inputs, const NormStats& stats, FeatureSet set);
/// Min-max scales the four physical channels of n target states.
std::vector<double> normalize_outputs(std::span<const State> targets, const NormStats& stats);
/// Exact inverse of normalize_outputs; returns n physical states.
std::vector<State> denormalize_outputs(std::span<const double> values, int steps, int height, int width,
                                       const NormStats& stats);

}  // namespace rdstack::features
