#include "rdstack/synth_sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>
#include <json.hpp>

#include "rdstack/error.hpp"

namespace rdstack::synth {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

constexpr double kDiffusionFloor = 1e-3;
constexpr double kReactiveConcentration = 1e-4;

std::size_t at(int i, int j, int w) {
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(w) + static_cast<std::size_t>(j);
}

double harmonic(double a, double b) {
  return 2.0 * a * b / (a + b);
}

double to_float(double v) {
  return static_cast<double>(static_cast<float>(v));
}

}  // namespace

void SynthConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) fail(ErrorCategory::config, std::string("synth config: ") + name + " must be > 0");
  };
  if (height < 2 || width < 3) fail(ErrorCategory::config, "synth config: grid must be at least 2 x 3");
  if (steps < 1) fail(ErrorCategory::config, "synth config: steps must be >= 1");
  if (grain_fraction < 0.0 || grain_fraction >= 1.0) fail(ErrorCategory::config, "synth config: grain_fraction in [0, 1)");
  if (solid_eps < 0.0 || solid_eps >= 0.01) fail(ErrorCategory::config, "synth config: solid_eps in [0, 0.01)");
  positive(inlet_concentration, "inlet_concentration");
  positive(diffusion, "diffusion");
  positive(reaction_rate, "reaction_rate");
  positive(dt, "dt");
  positive(conductivity_exponent, "conductivity_exponent");
  positive(k_min, "k_min");
  positive(length_scale, "length_scale");
  positive(peclet, "peclet");
  positive(pressure_tolerance, "pressure_tolerance");
  positive(concentration_tolerance, "concentration_tolerance");
  if (max_iterations < 1) fail(ErrorCategory::config, "synth config: max_iterations must be >= 1");
}

std::string SynthConfig::to_json() const {
  nlohmann::json j{{"height", height},
                   {"width", width},
                   {"steps", steps},
                   {"seed", seed},
                   {"grain_fraction", grain_fraction},
                   {"smoothing_passes", smoothing_passes},
                   {"solid_eps", solid_eps},
                   {"inlet_concentration", inlet_concentration},
                   {"diffusion", diffusion},
                   {"reaction_rate", reaction_rate},
                   {"dt", dt},
                   {"conductivity_exponent", conductivity_exponent},
                   {"k_min", k_min},
                   {"length_scale", length_scale},
                   {"peclet", peclet},
                   {"pressure_tolerance", pressure_tolerance},
                   {"concentration_tolerance", concentration_tolerance},
                   {"max_iterations", max_iterations}};
  return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    c.grain_fraction = j.value("grain_fraction", c.grain_fraction);
    c.smoothing_passes = j.value("smoothing_passes", c.smoothing_passes);
    c.solid_eps = j.value("solid_eps", c.solid_eps);
    c.inlet_concentration = j.value("inlet_concentration", c.inlet_concentration);
    c.diffusion = j.value("diffusion", c.diffusion);
    c.reaction_rate = j.value("reaction_rate", c.reaction_rate);
    c.dt = j.value("dt", c.dt);
    c.conductivity_exponent = j.value("conductivity_exponent", c.conductivity_exponent);
    c.k_min = j.value("k_min", c.k_min);
    c.length_scale = j.value("length_scale", c.length_scale);
    c.peclet = j.value("peclet", c.peclet);
    c.pressure_tolerance = j.value("pressure_tolerance", c.pressure_tolerance);
    c.concentration_tolerance = j.value("concentration_tolerance", c.concentration_tolerance);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::config, std::string("synth config: ") + e.what());
  }
  return c;
}

double conductivity(double eps, double exponent, double k_min) noexcept {
  return std::pow(eps, exponent) + k_min;
}

bool percolates(const StateMap& eps) {
  const int h = eps.height();
  const int w = eps.width();
  std::vector<char> seen(eps.size(), 0);
  std::queue<std::pair<int, int>> frontier;
  for (int i = 0; i < h; ++i) {
    if (eps(i, 0) > 0.5) {
      seen[at(i, 0, w)] = 1;
      frontier.emplace(i, 0);
    }
  }
  constexpr int di[] = {1, -1, 0, 0};
  constexpr int dj[] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    const auto [i, j] = frontier.front();
    frontier.pop();
    if (j == w - 1) return true;
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k];
      const int nj = j + dj[k];
      if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
      if (seen[at(ni, nj, w)] || !(eps(ni, nj) > 0.5)) continue;
      seen[at(ni, nj, w)] = 1;
      frontier.emplace(ni, nj);
    }
  }
  return false;
}

StateMap generate_geometry(std::uint64_t seed, int height, int width, double grain_fraction, int smoothing_passes,
                           double solid_eps) {
  if (grain_fraction < 0.0 || grain_fraction >= 1.0) {
    fail(ErrorCategory::invalid_argument, "grain_fraction must lie in [0, 1)");
  }
  StateMap eps(Channel::Eps, height, width, 1.0);
  if (grain_fraction == 0.0) return eps;

  const std::size_t cells = eps.size();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> noise(cells);
    for (double& v : noise) v = uniform(rng);

    std::vector<double> next(cells);
    for (int pass = 0; pass < smoothing_passes; ++pass) {
      for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
          double sum = 0.0;
          int count = 0;
          for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) {
              const int ni = i + a;
              const int nj = j + b;
              if (ni < 0 || nj < 0 || ni >= height || nj >= width) continue;
              sum += noise[at(ni, nj, width)];
              ++count;
            }
          }
          next[at(i, j, width)] = sum / count;
        }
      }
      noise.swap(next);
    }

    std::vector<double> sorted = noise;
    const auto k = static_cast<std::size_t>(std::floor(grain_fraction * static_cast<double>(cells)));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    const double threshold = sorted[k];
    auto v = eps.values();
    for (std::size_t c = 0; c < cells; ++c) v[c] = noise[c] < threshold ? solid_eps : 1.0;
    if (percolates(eps)) return eps;
  }
  fail(ErrorCategory::numerical, "generate_geometry: no percolating geometry after 100 attempts");
}

double PressureField::outlet_flux() const {
  const int h = pressure.height();
  const int w = pressure.width();
  double total = 0.0;
  for (int i = 0; i < h; ++i) total += flux_x[at(i, w - 2, w - 1)];
  return total;
}

PressureField solve_pressure(const StateMap& eps, const PressureBC& bc, double conductivity_exponent, double k_min,
                             double tolerance, int max_iterations) {
  const int h = eps.height();
  const int w = eps.width();
  if (w < 3) fail(ErrorCategory::invalid_argument, "solve_pressure needs at least 3 columns");

  PressureField field;
  field.conductivity = StateMap(Channel::Eps, h, w);
  for (std::size_t c = 0; c < eps.size(); ++c) {
    field.conductivity.values()[c] = conductivity(eps.values()[c], conductivity_exponent, k_min);
  }
  const StateMap& k = field.conductivity;

  // Unknowns: columns 1..w-2.
  const int inner = w - 2;
  auto unknown = [&](int i, int j) { return i * inner + (j - 1); };
  const int n = h * inner;
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < h; ++i) {
    for (int j = 1; j < w - 1; ++j) {
      const int row = unknown(i, j);
      double diag = 0.0;
      auto couple = [&](int ni, int nj) {
        const double t = harmonic(k(i, j), k(ni, nj));
        diag += t;
        if (nj == 0) {
          rhs[row] += t * bc.inlet;
        } else if (nj == w - 1) {
          rhs[row] += t * bc.outlet;
        } else {
          triplets.emplace_back(row, unknown(ni, nj), -t);
        }
      };
      couple(i, j - 1);
      couple(i, j + 1);
      if (i > 0) couple(i - 1, j);
      if (i < h - 1) couple(i + 1, j);
      triplets.emplace_back(row, row, diag);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(tolerance);
  cg.setMaxIterations(max_iterations);
  cg.compute(a);
  Eigen::VectorXd p = cg.solve(rhs);
  const double rhs_norm = rhs.norm();
  field.relative_residual = rhs_norm > 0.0 ? (rhs - a * p).norm() / rhs_norm : (a * p).norm();
  field.iterations = static_cast<int>(cg.iterations());
  if (cg.info() != Eigen::Success || !(field.relative_residual < std::max(tolerance * 100.0, 1e-8))) {
    fail(ErrorCategory::numerical, "solve_pressure did not converge (relative residual " +
                                       std::to_string(field.relative_residual) + " after " +
                                       std::to_string(field.iterations) + " iterations)");
  }

  field.pressure = StateMap(Channel::C, h, w);
  for (int i = 0; i < h; ++i) {
    field.pressure(i, 0) = bc.inlet;
    field.pressure(i, w - 1) = bc.outlet;
    for (int j = 1; j < w - 1; ++j) field.pressure(i, j) = p[unknown(i, j)];
  }
  const StateMap& pr = field.pressure;
  field.flux_x.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w - 1), 0.0);
  field.flux_y.assign(static_cast<std::size_t>(h - 1) * static_cast<std::size_t>(w), 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j + 1 < w; ++j) {
      field.flux_x[at(i, j, w - 1)] = harmonic(k(i, j), k(i, j + 1)) * (pr(i, j) - pr(i, j + 1));
    }
  }
  for (int i = 0; i + 1 < h; ++i) {
    for (int j = 0; j < w; ++j) {
      field.flux_y[at(i, j, w)] = harmonic(k(i, j), k(i + 1, j)) * (pr(i, j) - pr(i + 1, j));
    }
  }
  return field;
}

Velocity velocity_from_pressure(const PressureField& field) {
  const int h = field.pressure.height();
  const int w = field.pressure.width();
  Velocity v{StateMap(Channel::Ux, h, w), StateMap(Channel::Uy, h, w)};
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const bool left = j > 0;
      const bool right = j < w - 1;
      const double fl = left ? field.flux_x[at(i, j - 1, w - 1)] : 0.0;
      const double fr = right ? field.flux_x[at(i, j, w - 1)] : 0.0;
      v.ux(i, j) = (left && right) ? 0.5 * (fl + fr) : (left ? fl : fr);

      const bool up = i > 0;
      const bool down = i < h - 1;
      const double fu = up ? field.flux_y[at(i - 1, j, w)] : 0.0;
      const double fd = down ? field.flux_y[at(i, j, w)] : 0.0;
      if (up && down) {
        v.uy(i, j) = 0.5 * (fu + fd);
      } else if (up || down) {
        v.uy(i, j) = up ? fu : fd;
      }
    }
  }
  return v;
}

StateMap reactive_mask(const StateMap& eps) {
  const int h = eps.height();
  const int w = eps.width();
  StateMap mask(Channel::Filter, h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double e = eps(i, j);
      if (e >= 1.0) continue;
      bool active = e >= 0.01;
      if (!active) {
        active = (i > 0 && eps(i - 1, j) > 0.99) || (i < h - 1 && eps(i + 1, j) > 0.99) ||
                 (j > 0 && eps(i, j - 1) > 0.99) || (j < w - 1 && eps(i, j + 1) > 0.99);
      }
      mask(i, j) = active ? 1.0 : 0.0;
    }
  }
  return mask;
}

namespace {

/// Visits the discrete balance of cell (i, j): calls `term(coefficient, ni, nj)`
/// for every neighbour coupling (coefficient multiplies C_nb on the left-hand
/// side) and returns the diagonal coefficient.
template <typename Term>
double concentration_stencil(const StateMap& eps, const PressureField& field, double flux_scale,
                             const StateMap& sink_mask, const ConcentrationOptions& o, int i, int j, Term&& term) {
  const int h = eps.height();
  const int w = eps.width();
  double diag = 0.0;
  auto face = [&](double outward_flux, int ni, int nj) {
    const double q = outward_flux * flux_scale;
    const double d = o.diffusion * (0.5 * (eps(i, j) + eps(ni, nj)) + kDiffusionFloor);
    diag += std::max(q, 0.0) + d;
    term(std::min(q, 0.0) - d, ni, nj);
  };
  if (j > 0) face(-field.flux_x[at(i, j - 1, w - 1)], i, j - 1);
  if (j < w - 1) face(field.flux_x[at(i, j, w - 1)], i, j + 1);
  if (i > 0) face(-field.flux_y[at(i - 1, j, w)], i - 1, j);
  if (i < h - 1) face(field.flux_y[at(i, j, w)], i + 1, j);
  if (j == w - 1 && o.outlet == OutletCondition::zero_gradient) {
    // Everything entering the outlet column leaves through the boundary at C_P.
    diag += std::max(field.flux_x[at(i, w - 2, w - 1)] * flux_scale, 0.0);
  }
  diag += o.reaction_rate * sink_mask(i, j);
  return diag;
}

bool is_fixed(int j, int w, const ConcentrationOptions& o) {
  return j == 0 || (j == w - 1 && o.outlet == OutletCondition::fixed_zero);
}

}  // namespace

std::vector<double> concentration_residual(const StateMap& eps, const PressureField& field, double flux_scale,
                                           const StateMap& sink_mask, const ConcentrationOptions& options,
                                           const StateMap& c) {
  const int h = eps.height();
  const int w = eps.width();
  std::vector<double> residual(eps.size(), 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (is_fixed(j, w, options)) continue;
      double r = 0.0;
      const double diag = concentration_stencil(eps, field, flux_scale, sink_mask, options, i, j,
                                                [&](double coef, int ni, int nj) { r += coef * c(ni, nj); });
      r += diag * c(i, j);
      residual[at(i, j, w)] = r;
    }
  }
  return residual;
}

ConcentrationField steady_concentration(const StateMap& eps, const PressureField& field, double flux_scale,
                                        const ConcentrationOptions& options) {
  return steady_concentration(eps, field, flux_scale, reactive_mask(eps), options);
}

ConcentrationField steady_concentration(const StateMap& eps, const PressureField& field, double flux_scale,
                                        const StateMap& sink_mask, const ConcentrationOptions& options) {
  const int h = eps.height();
  const int w = eps.width();
  if (!eps.same_shape(field.pressure) || !eps.same_shape(sink_mask)) {
    fail(ErrorCategory::shape_mismatch, "steady_concentration: eps, pressure and mask shapes differ");
  }

  std::vector<int> index(eps.size(), -1);
  int n = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!is_fixed(j, w, options)) index[at(i, j, w)] = n++;
    }
  }
  auto fixed_value = [&](int j) { return j == 0 ? options.inlet_concentration : 0.0; };

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int row = index[at(i, j, w)];
      if (row < 0) continue;
      const double diag =
          concentration_stencil(eps, field, flux_scale, sink_mask, options, i, j, [&](double coef, int ni, int nj) {
            const int col = index[at(ni, nj, w)];
            if (col < 0) {
              rhs[row] -= coef * fixed_value(nj);
            } else {
              triplets.emplace_back(row, col, coef);
            }
          });
      triplets.emplace_back(row, row, diag);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> solver;
  solver.setTolerance(1e-14);
  solver.setMaxIterations(options.max_iterations);
  solver.compute(a);
  Eigen::VectorXd x = solver.solve(rhs);

  ConcentrationField out;
  out.iterations = static_cast<int>(solver.iterations());
  out.concentration = StateMap(Channel::C, h, w);
  StateMap& c = out.concentration;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int k = index[at(i, j, w)];
      c(i, j) = k < 0 ? fixed_value(j) : x[k];
    }
  }
  const auto residual = concentration_residual(eps, field, flux_scale, sink_mask, options, c);
  for (double r : residual) out.max_residual = std::max(out.max_residual, std::abs(r));
  if (!(out.max_residual < options.tolerance)) {
    fail(ErrorCategory::numerical, "steady_concentration did not converge (max residual " +
                                       std::to_string(out.max_residual) + ")");
  }
  // The exact solution lies in [0, c_in]; strip solver round-off at the bounds.
  for (double& v : c.values()) v = std::clamp(v, 0.0, options.inlet_concentration);
  return out;
}

StateMap step_eps(const StateMap& eps, const StateMap& concentration, double dt, double reaction_rate) {
  if (!eps.same_shape(concentration)) fail(ErrorCategory::shape_mismatch, "step_eps: shape mismatch");
  const StateMap mask = reactive_mask(eps);
  StateMap next = eps;
  auto e = next.values();
  auto c = concentration.values();
  auto m = mask.values();
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (m[k] > 0.0 && c[k] >= kReactiveConcentration) e[k] = std::min(1.0, e[k] + dt * reaction_rate * c[k]);
  }
  return next;
}

Simulation generate_simulation(const SynthConfig& cfg, const std::string& id) {
  cfg.validate();
  Simulation sim;
  sim.id = id;
  StateMap eps = generate_geometry(cfg.seed, cfg.height, cfg.width, cfg.grain_fraction, cfg.smoothing_passes,
                                   cfg.solid_eps);
  ConcentrationOptions copt;
  copt.inlet_concentration = cfg.inlet_concentration;
  copt.diffusion = cfg.diffusion;
  copt.reaction_rate = cfg.reaction_rate;
  copt.tolerance = cfg.concentration_tolerance;
  copt.max_iterations = cfg.max_iterations;
  const double target_speed = cfg.peclet * cfg.diffusion / cfg.length_scale;

  for (int step = 0; step < cfg.steps; ++step) {
    const PressureField field = solve_pressure(eps, PressureBC{1.0, 0.0}, cfg.conductivity_exponent, cfg.k_min,
                                               cfg.pressure_tolerance, cfg.max_iterations);
    Velocity vel = velocity_from_pressure(field);

    double speed = 0.0;
    int pores = 0;
    for (std::size_t k = 0; k < eps.size(); ++k) {
      if (eps.values()[k] > 0.5) {
        speed += std::hypot(vel.ux.values()[k], vel.uy.values()[k]);
        ++pores;
      }
    }
    speed /= std::max(pores, 1);
    const double scale = speed > 0.0 ? target_speed / speed : 0.0;
    for (double& v : vel.ux.values()) v *= scale;
    for (double& v : vel.uy.values()) v *= scale;

    const ConcentrationField conc = steady_concentration(eps, field, scale, copt);

    State state;
    state.push_back(conc.concentration);
    state.push_back(eps);
    state.push_back(vel.ux);
    state.push_back(vel.uy);
    for (StateMap& map : state) {
      for (double& v : map.values()) v = to_float(v);
    }
    sim.states.push_back(std::move(state));

    eps = step_eps(eps, conc.concentration, cfg.dt, cfg.reaction_rate);
  }
  return sim;
}

}  // namespace rdstack::synth
