#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"
#include "rdstack/nn/tensor.hpp"

namespace testing {

using rdstack::Channel;
using rdstack::Simulation;
using rdstack::State;
using rdstack::StateMap;

inline StateMap random_map(std::mt19937_64& rng, Channel ch, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  StateMap m(ch, h, w);
  for (double& v : m.values()) v = u(rng);
  return m;
}

/// Random physical state: C and eps in [0, 1], velocities in [-1, 1].
inline State random_state(std::mt19937_64& rng, int h, int w) {
  return {random_map(rng, Channel::C, h, w), random_map(rng, Channel::Eps, h, w),
          random_map(rng, Channel::Ux, h, w, -1.0, 1.0), random_map(rng, Channel::Uy, h, w, -1.0, 1.0)};
}

inline Simulation random_simulation(std::uint64_t seed, int steps, int h, int w, const std::string& id = "sim") {
  std::mt19937_64 rng(seed);
  Simulation sim;
  sim.id = id;
  for (int t = 0; t < steps; ++t) sim.states.push_back(random_state(rng, h, w));
  return sim;
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t count, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(count);
  for (double& x : v) x = u(rng);
  return v;
}

inline rdstack::nn::Tensor random_tensor(std::mt19937_64& rng, rdstack::nn::Shape shape, bool requires_grad,
                                         double lo = -1.0, double hi = 1.0) {
  return rdstack::nn::Tensor::from(shape, random_values(rng, shape.numel(), lo, hi), requires_grad);
}

/// Worst relative error between the analytic gradient of `loss` with respect
/// to `wrt` and a central finite difference, with error measured against
/// max(|analytic|, |numeric|, floor).
inline double gradient_error(const std::function<rdstack::nn::Tensor()>& loss, rdstack::nn::Tensor wrt,
                             double step = 1e-6, double floor = 1e-6) {
  rdstack::nn::Tensor l = loss();
  wrt.zero_grad();
  l.backward();
  const std::vector<double> analytic(wrt.grad().begin(), wrt.grad().end());
  double worst = 0.0;
  auto values = wrt.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + step;
    const double up = loss().item();
    values[i] = keep - step;
    const double down = loss().item();
    values[i] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rdstack-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
