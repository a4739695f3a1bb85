#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>

#include "rdstack/error.hpp"
#include "rdstack/synth_sim.hpp"
#include "support.hpp"

using namespace rdstack;
using namespace rdstack::synth;

namespace {

/// Breadth-first search over eps > 0.5 cells from column 0.
bool reaches_outlet(const StateMap& eps) {
  const int h = eps.height(), w = eps.width();
  std::vector<char> seen(eps.size(), 0);
  std::deque<std::pair<int, int>> queue;
  for (int i = 0; i < h; ++i) {
    if (eps(i, 0) > 0.5) {
      seen[i * w] = 1;
      queue.emplace_back(i, 0);
    }
  }
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    if (j == w - 1) return true;
    const int di[] = {1, -1, 0, 0};
    const int dj[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], b = j + dj[k];
      if (a < 0 || b < 0 || a >= h || b >= w || seen[a * w + b] || !(eps(a, b) > 0.5)) continue;
      seen[a * w + b] = 1;
      queue.emplace_back(a, b);
    }
  }
  return false;
}

double fx(const PressureField& f, int i, int j) { return f.flux_x[i * (f.pressure.width() - 1) + j]; }
double fy(const PressureField& f, int i, int j) { return f.flux_y[i * f.pressure.width() + j]; }

StateMap random_geometry(std::uint64_t seed, int h, int w) { return generate_geometry(seed, h, w, 0.4); }

}  // namespace

TEST_CASE("geometry") {
  const StateMap open = generate_geometry(1, 8, 8, 0.0);
  CHECK(std::all_of(open.values().begin(), open.values().end(), [](double v) { return v == 1.0; }));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StateMap g = random_geometry(seed, 24, 20);
    CHECK(reaches_outlet(g));
    CHECK(percolates(g));
    CHECK(g == random_geometry(seed, 24, 20));
  }
  CHECK_THROWS_AS(generate_geometry(1, 8, 8, 1.0), Error);
}

TEST_CASE("percolation agrees with a flood-fill oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    StateMap eps = testing::random_map(rng, Channel::Eps, 6, 7);
    CHECK(percolates(eps) == reaches_outlet(eps));
  }
}

TEST_CASE("open box pressure is linear") {
  for (int w : {3, 8, 17}) {
    const StateMap eps(Channel::Eps, 9, w, 1.0);
    const PressureField f = solve_pressure(eps, {1.0, 0.0});
    double worst = 0.0;
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < w; ++j) worst = std::max(worst, std::abs(f.pressure(i, j) - (1.0 - double(j) / (w - 1))));
    }
    CHECK(worst < 1e-6);
    const Velocity v = velocity_from_pressure(f);
    const double ux0 = v.ux(0, 0);
    CHECK(ux0 > 0.0);
    for (double u : v.ux.values()) CHECK(u == doctest::Approx(ux0).epsilon(1e-8));
    for (double u : v.uy.values()) CHECK(std::abs(u) < 1e-10);
  }
}

TEST_CASE("zero pressure drop gives zero velocity") {
  const StateMap eps = random_geometry(3, 12, 12);
  const Velocity v = velocity_from_pressure(solve_pressure(eps, {0.5, 0.5}));
  for (double u : v.ux.values()) CHECK(std::abs(u) < 1e-9);
  for (double u : v.uy.values()) CHECK(std::abs(u) < 1e-9);
}

TEST_CASE("pressure on a mirrored geometry is mirrored") {
  StateMap eps = random_geometry(4, 16, 14);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 14; ++j) eps(15 - i, j) = eps(i, j);
  }
  const PressureField f = solve_pressure(eps, {1.0, 0.0});
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 14; ++j) CHECK(std::abs(f.pressure(i, j) - f.pressure(15 - i, j)) < 1e-8);
  }
}

TEST_CASE("flux balance and conservation") {
  for (std::uint64_t seed = 5; seed < 10; ++seed) {
    const StateMap eps = random_geometry(seed, 12, 10);
    const PressureField f = solve_pressure(eps, {1.0, 0.0});
    const int h = 12, w = 10;
    double scale = 0.0;
    for (double q : f.flux_x) scale = std::max(scale, std::abs(q));
    REQUIRE(scale > 0.0);
    for (int i = 0; i < h; ++i) {
      for (int j = 1; j < w - 1; ++j) {
        double div = fx(f, i, j) - fx(f, i, j - 1);
        if (i < h - 1) div += fy(f, i, j);
        if (i > 0) div -= fy(f, i - 1, j);
        CHECK(std::abs(div) / scale < 1e-6);
      }
    }
    std::vector<double> sections;
    for (int j = 0; j < w - 1; ++j) {
      double q = 0.0;
      for (int i = 0; i < h; ++i) q += fx(f, i, j);
      sections.push_back(q);
    }
    for (double q : sections) CHECK(q == doctest::Approx(sections.front()).epsilon(1e-4));
    CHECK(f.outlet_flux() == doctest::Approx(sections.back()).epsilon(1e-8));
  }
}

TEST_CASE("concentration") {
  SUBCASE("pure diffusion on an open box is linear") {
    const StateMap eps(Channel::Eps, 6, 11, 1.0);
    const PressureField f = solve_pressure(eps, {1.0, 0.0});
    ConcentrationOptions opt;
    opt.outlet = OutletCondition::fixed_zero;
    opt.reaction_rate = 0.0;
    opt.tolerance = 1e-12;
    const ConcentrationField c = steady_concentration(eps, f, 0.0, StateMap(Channel::Filter, 6, 11, 0.0), opt);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 11; ++j) CHECK(c.concentration(i, j) == doctest::Approx(1.0 - j / 10.0).epsilon(1e-8));
    }
  }
  SUBCASE("a dominant sink empties the domain") {
    const StateMap eps(Channel::Eps, 6, 11, 1.0);
    const PressureField f = solve_pressure(eps, {1.0, 0.0});
    ConcentrationOptions opt;
    opt.reaction_rate = 1e8;
    const ConcentrationField c = steady_concentration(eps, f, 0.1, StateMap(Channel::Filter, 6, 11, 1.0), opt);
    for (int i = 0; i < 6; ++i) {
      for (int j = 1; j < 11; ++j) CHECK(c.concentration(i, j) < 1e-6);
    }
  }
  SUBCASE("discrete residual, bounds") {
    for (std::uint64_t seed = 11; seed < 14; ++seed) {
      const StateMap eps = random_geometry(seed, 10, 12);
      const PressureField f = solve_pressure(eps, {1.0, 0.0});
      ConcentrationOptions opt;
      const StateMap mask = reactive_mask(eps);
      const ConcentrationField c = steady_concentration(eps, f, 0.5, mask, opt);
      const auto r = concentration_residual(eps, f, 0.5, mask, opt, c.concentration);
      for (double v : r) CHECK(std::abs(v) < 1e-7);
      for (double v : c.concentration.values()) CHECK((v >= -1e-9 && v <= 1.0 + 1e-9));
      for (int i = 0; i < 10; ++i) CHECK(c.concentration(i, 0) == 1.0);
    }
  }
}

TEST_CASE("reactive mask") {
  StateMap eps(Channel::Eps, 3, 3, 0.0);
  eps(1, 1) = 1.0;  // open pore in the middle
  eps(0, 0) = 0.5;  // partially dissolved corner
  const StateMap m = reactive_mask(eps);
  CHECK(m(1, 1) == 0.0);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 1.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(2, 2) == 0.0);
}

TEST_CASE("eps update") {
  std::mt19937_64 rng(7);
  SUBCASE("no concentration, no change") {
    const StateMap eps = random_geometry(8, 8, 8);
    CHECK(step_eps(eps, StateMap(Channel::C, 8, 8, 0.0), 1.0, 0.25) == eps);
  }
  SUBCASE("monotone and bounded") {
    for (int trial = 0; trial < 20; ++trial) {
      const StateMap eps = testing::random_map(rng, Channel::Eps, 8, 8);
      const StateMap c = testing::random_map(rng, Channel::C, 8, 8);
      const StateMap next = step_eps(eps, c, 2.0, 0.9);
      for (std::size_t k = 0; k < eps.size(); ++k) {
        CHECK(next.values()[k] >= eps.values()[k]);
        CHECK(next.values()[k] <= 1.0);
      }
    }
  }
  SUBCASE("dissolved volume equals dt r sum of active C") {
    for (int trial = 0; trial < 20; ++trial) {
      const StateMap eps = testing::random_map(rng, Channel::Eps, 8, 8, 0.1, 0.5);
      const StateMap c = testing::random_map(rng, Channel::C, 8, 8, 0.0, 0.5);
      const double dt = 1.0, r = 0.25;
      const StateMap mask = reactive_mask(eps);
      double expected = 0.0;
      for (std::size_t k = 0; k < eps.size(); ++k) {
        if (mask.values()[k] > 0.0 && c.values()[k] >= 1e-4) expected += dt * r * c.values()[k];
      }
      const StateMap next = step_eps(eps, c, dt, r);
      double dissolved = 0.0;
      for (std::size_t k = 0; k < eps.size(); ++k) dissolved += next.values()[k] - eps.values()[k];
      CHECK(std::abs(dissolved - expected) < 1e-10);
    }
  }
}

TEST_CASE("generated trajectory") {
  SynthConfig cfg;
  cfg.seed = 21;
  const Simulation sim = generate_simulation(cfg, "g");
  CHECK(sim.steps() == 20);
  CHECK(sim.height() == 32);
  CHECK(validate_simulation(sim).ok());
  double previous = -1.0;
  for (int t = 0; t < sim.steps(); ++t) {
    const StateMap& eps = sim.map(t, Channel::Eps);
    double sum = 0.0;
    for (double v : eps.values()) sum += v;
    CHECK(sum >= previous);
    previous = sum;
    if (t > 0) {
      for (std::size_t k = 0; k < eps.size(); ++k) CHECK(eps.values()[k] >= sim.map(t - 1, Channel::Eps).values()[k]);
    }
    for (double v : sim.map(t, Channel::C).values()) CHECK((v >= 0.0 && v <= 1.0));
    for (double v : sim.map(t, Channel::Ux).values()) CHECK(std::isfinite(v));
  }
  CHECK(generate_simulation(cfg, "g") == sim);
}

TEST_CASE("config validation and json") {
  SynthConfig cfg;
  cfg.diffusion = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  SynthConfig a;
  a.seed = 99;
  a.peclet = 2.0;
  CHECK(SynthConfig::from_json(a.to_json()) == a);
}
