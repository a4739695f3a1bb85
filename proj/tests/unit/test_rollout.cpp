#include <doctest.h>

#include <cmath>

#include "rdstack/error.hpp"
#include "rdstack/rollout.hpp"
#include "rdstack/synth_sim.hpp"
#include "support.hpp"

using namespace rdstack;
using namespace rdstack::models;
using nn::Tensor;

namespace {

/// Looks the answer up in the true simulation; counts calls.
class TruthForecaster final : public Forecaster {
 public:
  TruthForecaster(const Simulation& sim, int m, int n) : sim_(sim), m_(m), n_(n) {}
  int m() const override { return m_; }
  int n() const override { return n_; }
  std::vector<State> forecast(std::span<const State> window) override {
    // Window must be the true states ending right before the next anchor.
    const int start = m_ + calls * n_ - m_;
    for (int k = 0; k < m_; ++k) CHECK(window[k] == sim_.states[start + k]);
    ++calls;
    const int anchor = start + m_;
    return {sim_.states.begin() + anchor, sim_.states.begin() + anchor + n_};
  }
  int calls = 0;

 private:
  const Simulation& sim_;
  int m_, n_;
};

class ConstantModel final : public SequenceModel {
 public:
  ConstantModel(ModelSpec spec, double logit) : SequenceModel(std::move(spec)), logit_(logit) {}

 protected:
  Tensor forward_impl(const Tensor& x) const override {
    return Tensor::full({x.shape().n, spec_.n * 4, x.shape().h, x.shape().w}, logit_);
  }
  std::vector<std::string> output_layer() const override { return {}; }

 private:
  double logit_;
};

Simulation physical_only(const Simulation& sim) {
  Simulation out;
  out.id = sim.id;
  out.dt_index = sim.dt_index;
  for (int s = 0; s < sim.steps(); ++s) {
    State st;
    for (Channel c : kPhysicalChannels) st.push_back(sim.map(s, c));
    out.states.push_back(std::move(st));
  }
  return out;
}

Simulation synthetic(int steps, int size, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.height = size;
  cfg.width = size;
  cfg.steps = steps;
  cfg.seed = seed;
  return physical_only(synth::generate_simulation(cfg, "r" + std::to_string(seed)));
}

}  // namespace

TEST_CASE("iteration count") {
  CHECK(num_iterations(100, 5) == 19);
  CHECK(num_iterations(10, 5) == 1);
  CHECK(num_iterations(23, 5) == 3);
  CHECK_THROWS_AS(num_iterations(9, 5), Error);
  CHECK_THROWS_AS(num_iterations(10, 0), Error);
  // Property: the count equals the number of whole n-blocks after the seed.
  for (int n = 1; n <= 7; ++n) {
    for (int total = 2 * n; total <= 60; ++total) {
      int blocks = 0;
      for (int end = 2 * n; end <= total; end += n) ++blocks;
      CHECK(num_iterations(total, n) == blocks);
    }
  }
}

TEST_CASE("rollout with a perfect forecaster reproduces the truth") {
  const Simulation sim = synthetic(20, 32, 7);
  TruthForecaster oracle(sim, 5, 5);
  const RolloutResult r = rollout(oracle, sim);
  CHECK(oracle.calls == 3);
  REQUIRE(r.steps() == 20);
  CHECK(r.trajectory == sim);
  for (int s = 0; s < 20; ++s) {
    CHECK(r.provenance[s] == (s < 5 ? Provenance::ground_truth : Provenance::predicted));
  }
  CHECK(r.anchors == std::vector<int>{5, 10, 15});
  CHECK(r.first_predicted() == 5);
}

TEST_CASE("rollout stops at the last whole block") {
  const Simulation sim = synthetic(23, 8, 8);
  TruthForecaster oracle(sim, 5, 5);
  const RolloutResult r = rollout(oracle, sim);
  CHECK(r.steps() == 20);
  CHECK(oracle.calls == 3);

  TruthForecaster unequal(sim, 4, 5);
  CHECK_THROWS_AS(rollout(unequal, sim), Error);
  const Simulation short_sim = synthetic(9, 8, 9);
  TruthForecaster o2(short_sim, 5, 5);
  CHECK_THROWS_AS(rollout(o2, short_sim), Error);
}

TEST_CASE("stack rollout feeds predictions back and denormalizes") {
  synth::SynthConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.steps = 20;
  cfg.seed = 3;
  const Simulation full = synth::generate_simulation(cfg, "a");
  const Simulation* ptr = &full;
  const features::NormStats stats = features::fit_norm_stats(std::span<const Simulation* const>(&ptr, 1));

  ModelSpec spec = ModelSpec::defaults(Family::ufno);
  spec.modes = 3;
  const double logit = 0.4;
  StackedModel stack;
  stack.add_model(std::make_shared<ConstantModel>(spec, logit), stats.hash());
  const RolloutResult r = rollout(stack, physical_only(full), stats);
  CHECK(r.steps() == 20);
  CHECK(r.forecast_ms.size() == 3);
  CHECK(stack.forward_count() == 3);
  const double s = 1.0 / (1.0 + std::exp(-logit));
  for (int step = 5; step < 20; ++step) {
    for (int c = 0; c < 4; ++c) {
      const double expected = stats.out_min[c] + s * (stats.out_max[c] - stats.out_min[c]);
      for (double v : r.trajectory.states[step][c].values()) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  for (int step = 0; step < 5; ++step) CHECK(r.trajectory.states[step] == physical_only(full).states[step]);

  features::NormStats other = stats;
  other.mean[0] += 1.0;
  CHECK_THROWS_AS(rollout(stack, physical_only(full), other), Error);
}

TEST_CASE("rollout directories round-trip") {
  testing::TempDir tmp("rollout");
  const Simulation sim = synthetic(10, 8, 11);
  TruthForecaster oracle(sim, 5, 5);
  RolloutResult r = rollout(oracle, sim);
  r.forecast_ms = {1.5};
  write_rollout(tmp.path() / "x", r);
  CHECK_THROWS_AS(write_rollout(tmp.path() / "x", r), Error);
  write_rollout(tmp.path() / "x", r, true);
  const RolloutResult back = read_rollout(tmp.path() / "x");
  CHECK(back.trajectory == r.trajectory);
  CHECK(back.provenance == r.provenance);
  CHECK(back.anchors == r.anchors);
  CHECK(back.forecast_ms == r.forecast_ms);
  CHECK(back.m == 5);
  CHECK(back.n == 5);
}
