#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rdstack {

/// Physical channels first (C, eps, Ux, Uy), then the engineered ones.
enum class Channel : std::uint8_t { C, Eps, Ux, Uy, U, CScaled, Filter };

inline constexpr std::array<Channel, 4> kPhysicalChannels{Channel::C, Channel::Eps, Channel::Ux,
                                                          Channel::Uy};
inline constexpr std::array<Channel, 7> kAllChannels{Channel::C,  Channel::Eps,     Channel::Ux,
                                                     Channel::Uy, Channel::U,       Channel::CScaled,
                                                     Channel::Filter};

std::string_view channel_name(Channel channel) noexcept;
Channel channel_from_name(std::string_view name);

/// One field on an H x W grid, row-major.
class StateMap {
 public:
  StateMap() = default;
  StateMap(Channel channel, int height, int width, double fill = 0.0);
  StateMap(Channel channel, int height, int width, std::vector<double> values);

  Channel channel() const noexcept { return channel_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(int row, int col) { return values_[index(row, col)]; }
  double operator()(int row, int col) const { return values_[index(row, col)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const StateMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const StateMap&, const StateMap&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  Channel channel_ = Channel::C;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// All channel maps of one time step, ordered like Simulation::channels.
using State = std::vector<StateMap>;

/// Looks up a channel inside a state by its tag rather than by position.
const StateMap& find_map(const State& state, Channel channel);

struct Simulation {
  std::string id;
  int dt_index = 1;
  std::vector<Channel> channels{kPhysicalChannels.begin(), kPhysicalChannels.end()};
  std::vector<State> states;

  int steps() const noexcept { return static_cast<int>(states.size()); }
  int height() const;
  int width() const;
  int channel_index(Channel channel) const;
  const StateMap& map(int step, Channel channel) const;
  StateMap& map(int step, Channel channel);

  friend bool operator==(const Simulation&, const Simulation&) = default;
};

enum class ViolationKind { empty, channel_set, shape_mismatch, non_finite, eps_range, filter_range };

struct Violation {
  ViolationKind kind;
  int step = -1;
  Channel channel = Channel::C;
  int row = -1;
  int col = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string summary(std::size_t max_lines = 10) const;
};

/// Lists every broken invariant. Never throws on bad data.
ValidationReport validate_simulation(const Simulation& sim);

/// Removes equal margins so every map becomes target_h x target_w.
Simulation crop_borders(const Simulation& sim, int target_h, int target_w);

enum class Split { train, validation };
std::string_view split_name(Split split) noexcept;
Split split_from_name(std::string_view name);

struct Ensemble {
  std::vector<Simulation> simulations;
  std::map<std::string, Split> split;

  std::vector<const Simulation*> members(Split which) const;
};

/// Uniform random partition. A pure function of (sorted ids, train_count, seed).
Ensemble split_ensemble(Ensemble ensemble, int train_count, std::uint64_t seed);

/// A view of m input states ending at `anchor` and the n states that follow.
/// The referenced simulation must outlive the window.
class Window {
 public:
  Window(const Simulation& sim, int anchor, int m, int n);

  const std::string& sim_id() const noexcept { return sim_->id; }
  const Simulation& simulation() const noexcept { return *sim_; }
  int anchor() const noexcept { return anchor_; }
  int m() const noexcept { return m_; }
  int n() const noexcept { return n_; }

  int input_step(int k) const noexcept { return anchor_ - m_ + 1 + k; }
  int target_step(int k) const noexcept { return anchor_ + 1 + k; }
  const State& input(int k) const { return sim_->states[static_cast<std::size_t>(input_step(k))]; }
  const State& target(int k) const { return sim_->states[static_cast<std::size_t>(target_step(k))]; }

 private:
  const Simulation* sim_;
  int anchor_;
  int m_;
  int n_;
};

std::vector<Window> make_windows(const Simulation& sim, int m, int n, int stride = 1);

}  // namespace rdstack
