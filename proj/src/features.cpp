#include "rdstack/features.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "rdstack/error.hpp"
#include "rdstack/hash.hpp"

namespace rdstack::features {

namespace {

void require_same_shape(const StateMap& a, const StateMap& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCategory::shape_mismatch, std::string(op) + ": " + std::to_string(a.height()) + "x" +
                                            std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                                            std::to_string(b.width()));
  }
}

void require_fitted(const NormStats& stats) {
  if (!stats.fitted) fail(ErrorCategory::prerequisite, "normalization stats have not been fitted");
}

}  // namespace

StateMap velocity_magnitude(const StateMap& ux, const StateMap& uy) {
  require_same_shape(ux, uy, "velocity_magnitude");
  StateMap out(Channel::U, ux.height(), ux.width());
  auto x = ux.values();
  auto y = uy.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::sqrt(x[i] * x[i] + y[i] * y[i]);
  return out;
}

StateMap scaled_concentration(const StateMap& c, double floor) {
  if (!(floor > 0.0) || floor >= 1.0) fail(ErrorCategory::invalid_argument, "concentration floor must be in (0, 1)");
  const double lo = std::log10(floor);
  const double span = 0.0 - lo;
  StateMap out(Channel::CScaled, c.height(), c.width());
  auto in = c.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (std::log10(std::max(in[i], floor)) - lo) / span;
  return out;
}

StateMap combined_filter(const StateMap& c, const StateMap& eps) {
  require_same_shape(c, eps, "combined_filter");
  StateMap out(Channel::Filter, c.height(), c.width());
  auto cv = c.values();
  auto ev = eps.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const bool active = cv[i] >= kFilterMinConcentration && ev[i] >= kFilterMinEps && ev[i] <= kFilterMaxEps;
    o[i] = active ? 1.0 : 0.0;
  }
  return out;
}

FeatureSet feature_set_from_count(int count) {
  if (count == 4) return FeatureSet::physical;
  if (count == 7) return FeatureSet::engineered;
  fail(ErrorCategory::config, "feature count must be 4 or 7, got " + std::to_string(count));
}

State input_channels(const State& state, FeatureSet set) {
  State out;
  out.reserve(7);
  for (Channel ch : kPhysicalChannels) out.push_back(find_map(state, ch));
  if (set == FeatureSet::engineered) {
    out.push_back(velocity_magnitude(out[2], out[3]));
    out.push_back(scaled_concentration(out[0]));
    out.push_back(combined_filter(out[0], out[1]));
  }
  return out;
}

NormStats fit_norm_stats(std::span<const Simulation> train) {
  std::vector<const Simulation*> ptrs;
  for (const auto& sim : train) ptrs.push_back(&sim);
  return fit_norm_stats(std::span<const Simulation* const>(ptrs));
}

NormStats fit_norm_stats(std::span<const Simulation* const> train) {
  if (train.empty()) fail(ErrorCategory::invalid_argument, "fit_norm_stats needs at least one training simulation");

  // Two passes per channel (mean, then centered sum of squares) for accuracy.
  std::array<double, 7> sum{};
  std::array<double, 7> sq{};
  std::array<double, 4> lo;
  std::array<double, 4> hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  double count = 0.0;

  auto for_each_state = [&](auto&& fn) {
    for (const Simulation* sim : train) {
      for (const State& state : sim->states) fn(input_channels(state, FeatureSet::engineered));
    }
  };

  for_each_state([&](const State& chans) {
    for (std::size_t c = 0; c < 7; ++c) {
      for (double v : chans[c].values()) sum[c] += v;
    }
    for (std::size_t c = 0; c < 4; ++c) {
      for (double v : chans[c].values()) {
        lo[c] = std::min(lo[c], v);
        hi[c] = std::max(hi[c], v);
      }
    }
    count += static_cast<double>(chans[0].size());
  });

  NormStats stats;
  for (std::size_t c = 0; c < 7; ++c) stats.mean[c] = sum[c] / count;
  for_each_state([&](const State& chans) {
    for (std::size_t c = 0; c < 7; ++c) {
      for (double v : chans[c].values()) sq[c] += (v - stats.mean[c]) * (v - stats.mean[c]);
    }
  });
  for (std::size_t c = 0; c < 7; ++c) {
    stats.stddev[c] = std::sqrt(sq[c] / count);
    if (stats.standardized[c] && !(stats.stddev[c] > 0.0)) {
      fail(ErrorCategory::data, "channel " + std::string(channel_name(kAllChannels[c])) +
                                    " is constant over the training set; cannot standardize");
    }
    if (!stats.standardized[c]) {
      stats.mean[c] = 0.0;
      stats.stddev[c] = 1.0;
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (!(hi[c] > lo[c])) {
      fail(ErrorCategory::data, "target channel " + std::string(channel_name(kAllChannels[c])) +
                                    " has max == min over the training set");
    }
    stats.out_min[c] = lo[c];
    stats.out_max[c] = hi[c];
  }
  stats.fitted = true;
  return stats;
}

std::string NormStats::to_json() const {
  nlohmann::json j;
  j["format"] = "rdstack-normstats";
  j["version"] = 1;
  nlohmann::json inputs = nlohmann::json::array();
  for (std::size_t c = 0; c < 7; ++c) {
    inputs.push_back({{"channel", std::string(channel_name(kAllChannels[c]))},
                      {"mean", mean[c]},
                      {"std", stddev[c]},
                      {"standardized", standardized[c]}});
  }
  nlohmann::json outputs = nlohmann::json::array();
  for (std::size_t c = 0; c < 4; ++c) {
    outputs.push_back({{"channel", std::string(channel_name(kAllChannels[c]))}, {"min", out_min[c]}, {"max", out_max[c]}});
  }
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["fitted"] = fitted;
  // max_digits10 through nlohmann's default double formatting round-trips exactly.
  return j.dump(2);
}

NormStats NormStats::from_json(const std::string& text) {
  NormStats stats;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& inputs = j.at("inputs");
    const auto& outputs = j.at("outputs");
    if (inputs.size() != 7 || outputs.size() != 4) fail(ErrorCategory::data, "norm stats need 7 inputs and 4 outputs");
    for (std::size_t c = 0; c < 7; ++c) {
      if (channel_from_name(inputs[c].at("channel").get<std::string>()) != kAllChannels[c]) {
        fail(ErrorCategory::data, "norm stats input channels out of order");
      }
      stats.mean[c] = inputs[c].at("mean").get<double>();
      stats.stddev[c] = inputs[c].at("std").get<double>();
      stats.standardized[c] = inputs[c].at("standardized").get<bool>();
    }
    for (std::size_t c = 0; c < 4; ++c) {
      stats.out_min[c] = outputs[c].at("min").get<double>();
      stats.out_max[c] = outputs[c].at("max").get<double>();
    }
    stats.fitted = j.at("fitted").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::data, std::string("norm stats: ") + e.what());
  }
  return stats;
}

std::string NormStats::hash() const {
  return fnv1a_hex(to_json());
}

std::vector<double> normalize_inputs(std::span<const State> inputs, const NormStats& stats, FeatureSet set) {
  require_fitted(stats);
  const int channels = channel_count(set);
  std::vector<double> out;
  for (const State& state : inputs) {
    const State chans = input_channels(state, set);
    for (int c = 0; c < channels; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const double mu = stats.mean[cu];
      const double inv = 1.0 / stats.stddev[cu];
      for (double v : chans[cu].values()) out.push_back(stats.standardized[cu] ? (v - mu) * inv : v);
    }
  }
  return out;
}

std::vector<double> normalize_outputs(std::span<const State> targets, const NormStats& stats) {
  require_fitted(stats);
  std::vector<double> out;
  for (const State& state : targets) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double lo = stats.out_min[c];
      const double span = stats.out_max[c] - lo;
      for (double v : find_map(state, kPhysicalChannels[c]).values()) out.push_back((v - lo) / span);
    }
  }
  return out;
}

std::vector<State> denormalize_outputs(std::span<const double> values, int steps, int height, int width,
                                       const NormStats& stats) {
  require_fitted(stats);
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  if (values.size() != static_cast<std::size_t>(steps) * 4 * plane) {
    fail(ErrorCategory::shape_mismatch, "denormalize_outputs: value count does not match steps x 4 x H x W");
  }
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(steps));
  std::size_t k = 0;
  for (int s = 0; s < steps; ++s) {
    State state;
    for (std::size_t c = 0; c < 4; ++c) {
      const double lo = stats.out_min[c];
      const double span = stats.out_max[c] - lo;
      std::vector<double> v(plane);
      for (std::size_t i = 0; i < plane; ++i) v[i] = values[k++] * span + lo;
      state.emplace_back(kPhysicalChannels[c], height, width, std::move(v));
    }
    out.push_back(std::move(state));
  }
  return out;
}

}  // namespace rdstack::features
