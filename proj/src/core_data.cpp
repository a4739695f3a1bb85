#include "rdstack/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "rdstack/error.hpp"

namespace rdstack {

std::string_view channel_name(Channel channel) noexcept {
  switch (channel) {
    case Channel::C: return "C";
    case Channel::Eps: return "eps";
    case Channel::Ux: return "Ux";
    case Channel::Uy: return "Uy";
    case Channel::U: return "U";
    case Channel::CScaled: return "Cscaled";
    case Channel::Filter: return "Filter";
  }
  return "?";
}

Channel channel_from_name(std::string_view name) {
  for (Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  fail(ErrorCategory::data, "unknown channel name '" + std::string(name) + "'");
}

StateMap::StateMap(Channel channel, int height, int width, double fill)
    : channel_(channel), height_(height), width_(width) {
  if (height < 1 || width < 1) {
    fail(ErrorCategory::invalid_argument, "state map needs H >= 1 and W >= 1");
  }
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

StateMap::StateMap(Channel channel, int height, int width, std::vector<double> values)
    : channel_(channel), height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) {
    fail(ErrorCategory::invalid_argument, "state map needs H >= 1 and W >= 1");
  }
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    fail(ErrorCategory::shape_mismatch, "state map value count does not match H x W");
  }
}

const StateMap& find_map(const State& state, Channel channel) {
  for (const auto& map : state) {
    if (map.channel() == channel) return map;
  }
  fail(ErrorCategory::data, "state has no channel " + std::string(channel_name(channel)));
}

int Simulation::height() const {
  if (states.empty() || states.front().empty()) fail(ErrorCategory::data, "simulation " + id + " is empty");
  return states.front().front().height();
}

int Simulation::width() const {
  if (states.empty() || states.front().empty()) fail(ErrorCategory::data, "simulation " + id + " is empty");
  return states.front().front().width();
}

int Simulation::channel_index(Channel channel) const {
  auto it = std::find(channels.begin(), channels.end(), channel);
  if (it == channels.end()) {
    fail(ErrorCategory::data, "simulation " + id + " has no channel " + std::string(channel_name(channel)));
  }
  return static_cast<int>(it - channels.begin());
}

const StateMap& Simulation::map(int step, Channel channel) const {
  return states.at(static_cast<std::size_t>(step)).at(static_cast<std::size_t>(channel_index(channel)));
}

StateMap& Simulation::map(int step, Channel channel) {
  return states.at(static_cast<std::size_t>(step)).at(static_cast<std::size_t>(channel_index(channel)));
}

std::string ValidationReport::summary(std::size_t max_lines) const {
  std::ostringstream out;
  out << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_lines; ++i) {
    out << "\n  " << violations[i].message;
  }
  return out.str();
}

ValidationReport validate_simulation(const Simulation& sim) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, int step, Channel ch, int row, int col, std::string msg) {
    report.violations.push_back(Violation{kind, step, ch, row, col, std::move(msg)});
  };

  if (sim.states.empty()) {
    add(ViolationKind::empty, -1, Channel::C, -1, -1, "simulation '" + sim.id + "' has no time steps");
    return report;
  }

  int ref_h = -1;
  int ref_w = -1;
  for (int step = 0; step < sim.steps(); ++step) {
    const State& state = sim.states[static_cast<std::size_t>(step)];
    if (state.size() != sim.channels.size()) {
      add(ViolationKind::channel_set, step, Channel::C, -1, -1,
          "step " + std::to_string(step) + " has " + std::to_string(state.size()) + " channels, expected " +
              std::to_string(sim.channels.size()));
      continue;
    }
    for (std::size_t k = 0; k < state.size(); ++k) {
      const StateMap& map = state[k];
      const Channel ch = sim.channels[k];
      if (map.channel() != ch) {
        add(ViolationKind::channel_set, step, map.channel(), -1, -1,
            "step " + std::to_string(step) + " slot " + std::to_string(k) + " holds channel " +
                std::string(channel_name(map.channel())) + ", expected " + std::string(channel_name(ch)));
      }
      if (ref_h < 0) {
        ref_h = map.height();
        ref_w = map.width();
      }
      if (map.height() != ref_h || map.width() != ref_w || map.size() != std::size_t(ref_h) * std::size_t(ref_w)) {
        add(ViolationKind::shape_mismatch, step, ch, -1, -1,
            "step " + std::to_string(step) + " channel " + std::string(channel_name(ch)) + " is " +
                std::to_string(map.height()) + "x" + std::to_string(map.width()) + ", expected " +
                std::to_string(ref_h) + "x" + std::to_string(ref_w));
        continue;
      }
      for (int i = 0; i < map.height(); ++i) {
        for (int j = 0; j < map.width(); ++j) {
          const double v = map(i, j);
          const std::string where = "step " + std::to_string(step) + " channel " +
                                    std::string(channel_name(ch)) + " at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")";
          if (!std::isfinite(v)) {
            add(ViolationKind::non_finite, step, ch, i, j, where + " is not finite");
          } else if (ch == Channel::Eps && (v < 0.0 || v > 1.0)) {
            add(ViolationKind::eps_range, step, ch, i, j, where + " = " + std::to_string(v) + " outside [0, 1]");
          } else if (ch == Channel::Filter && v != 0.0 && v != 1.0) {
            add(ViolationKind::filter_range, step, ch, i, j, where + " = " + std::to_string(v) + " not in {0, 1}");
          }
        }
      }
    }
  }
  return report;
}

Simulation crop_borders(const Simulation& sim, int target_h, int target_w) {
  const int h = sim.height();
  const int w = sim.width();
  const int dh = h - target_h;
  const int dw = w - target_w;
  if (target_h < 1 || target_w < 1 || dh < 0 || dw < 0) {
    fail(ErrorCategory::invalid_argument, "crop target " + std::to_string(target_h) + "x" +
                                              std::to_string(target_w) + " is larger than the " +
                                              std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  if (dh % 2 != 0 || dw % 2 != 0) {
    fail(ErrorCategory::invalid_argument,
         "crop margins must be even so equal bands come off both sides (got " + std::to_string(dh) + " rows, " +
             std::to_string(dw) + " columns)");
  }
  const int top = dh / 2;
  const int left = dw / 2;

  Simulation out;
  out.id = sim.id;
  out.dt_index = sim.dt_index;
  out.channels = sim.channels;
  out.states.reserve(sim.states.size());
  for (const State& state : sim.states) {
    State cropped;
    cropped.reserve(state.size());
    for (const StateMap& map : state) {
      if (map.height() != h || map.width() != w) {
        fail(ErrorCategory::shape_mismatch, "simulation " + sim.id + " has inconsistent map sizes");
      }
      StateMap c(map.channel(), target_h, target_w);
      for (int i = 0; i < target_h; ++i) {
        for (int j = 0; j < target_w; ++j) c(i, j) = map(i + top, j + left);
      }
      cropped.push_back(std::move(c));
    }
    out.states.push_back(std::move(cropped));
  }
  return out;
}

std::string_view split_name(Split split) noexcept {
  return split == Split::train ? "train" : "validation";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  fail(ErrorCategory::data, "unknown split '" + std::string(name) + "'");
}

std::vector<const Simulation*> Ensemble::members(Split which) const {
  std::vector<const Simulation*> out;
  for (const auto& sim : simulations) {
    auto it = split.find(sim.id);
    if (it != split.end() && it->second == which) out.push_back(&sim);
  }
  return out;
}

Ensemble split_ensemble(Ensemble ensemble, int train_count, std::uint64_t seed) {
  const int total = static_cast<int>(ensemble.simulations.size());
  if (train_count <= 0 || train_count >= total) {
    fail(ErrorCategory::invalid_argument, "train_count must be in (0, " + std::to_string(total) + "), got " +
                                              std::to_string(train_count));
  }
  std::vector<std::string> ids;
  ids.reserve(ensemble.simulations.size());
  for (const auto& sim : ensemble.simulations) ids.push_back(sim.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    fail(ErrorCategory::data, "ensemble contains duplicate simulation ids");
  }

  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ensemble.split.clear();
  for (int i = 0; i < total; ++i) {
    ensemble.split[ids[static_cast<std::size_t>(i)]] = i < train_count ? Split::train : Split::validation;
  }
  return ensemble;
}

Window::Window(const Simulation& sim, int anchor, int m, int n) : sim_(&sim), anchor_(anchor), m_(m), n_(n) {
  if (m < 1 || n < 1 || anchor - m + 1 < 0 || anchor + n >= sim.steps()) {
    fail(ErrorCategory::invalid_argument, "window anchored at " + std::to_string(anchor) +
                                              " does not fit simulation " + sim.id);
  }
}

std::vector<Window> make_windows(const Simulation& sim, int m, int n, int stride) {
  if (m < 1 || n < 1 || stride < 1) {
    fail(ErrorCategory::invalid_argument, "make_windows needs m, n, stride >= 1");
  }
  if (sim.steps() < m + n) {
    fail(ErrorCategory::data, "simulation " + sim.id + " has " + std::to_string(sim.steps()) +
                                  " steps; at least m + n = " + std::to_string(m + n) + " are needed");
  }
  std::vector<Window> windows;
  for (int t = m - 1; t + n < sim.steps(); t += stride) windows.emplace_back(sim, t, m, n);
  return windows;
}

}  // namespace rdstack
