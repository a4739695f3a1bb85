#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rdstack/core_data.hpp"

namespace rdstack::synth {

/// Desk-scale dissolution generator. It alternates a Darcy pressure solve,
/// a steady advection-diffusion-reaction solve and an explicit porosity
/// update. It is a stand-in with the same state variables as a pore-scale
/// micro-continuum solver, not a reimplementation of one.
struct SynthConfig {
  int height = 32;
  int width = 32;
  int steps = 20;
  std::uint64_t seed = 1;
  double grain_fraction = 0.45;
  int smoothing_passes = 3;
  double solid_eps = 0.0;

  double inlet_concentration = 1.0;
  double diffusion = 1.0;
  double reaction_rate = 0.25;
  double dt = 1.0;
  double conductivity_exponent = 3.0;
  double k_min = 1e-4;
  /// Length scale (cells) used to turn the dimensionless targets into rates.
  double length_scale = 4.0;
  /// Mean pore speed is set to peclet * diffusion / length_scale.
  double peclet = 1.0;
  /// Reported as reaction_rate * length_scale / diffusion; informational.
  double kinetic() const noexcept { return reaction_rate * length_scale / diffusion; }

  double pressure_tolerance = 1e-10;
  double concentration_tolerance = 1e-7;
  int max_iterations = 20000;

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Permeability law k(eps) = eps^exponent + k_min.
double conductivity(double eps, double exponent, double k_min) noexcept;

/// True when cells with eps > 0.5 connect column 0 to column W-1 (4-neighbour).
bool percolates(const StateMap& eps);

/// Thresholded smoothed noise; grains take `solid_eps`, pores 1. Redraws with a
/// derived seed until the pore space percolates (at most 100 attempts).
StateMap generate_geometry(std::uint64_t seed, int height, int width, double grain_fraction,
                           int smoothing_passes = 3, double solid_eps = 0.0);

struct PressureBC {
  double inlet = 1.0;
  double outlet = 0.0;
};

/// Solution of div(k grad p) = 0 on cell centres. Columns 0 and W-1 are
/// Dirichlet; top and bottom walls are no-flux. Face conductances are
/// harmonic means of the adjacent k values.
struct PressureField {
  StateMap pressure;
  StateMap conductivity;
  /// Flux through the face between (i, j) and (i, j+1); H x (W-1).
  std::vector<double> flux_x;
  /// Flux through the face between (i, j) and (i+1, j); (H-1) x W.
  std::vector<double> flux_y;
  double relative_residual = 0.0;
  int iterations = 0;

  /// Net flow leaving through the outlet column.
  double outlet_flux() const;
};

PressureField solve_pressure(const StateMap& eps, const PressureBC& bc, double conductivity_exponent = 3.0,
                             double k_min = 1e-4, double tolerance = 1e-10, int max_iterations = 20000);

struct Velocity {
  StateMap ux;
  StateMap uy;
};

/// Cell velocities from face fluxes: the mean of the two faces bracketing a
/// cell (a central difference of p weighted by face conductance), or the
/// single adjacent face at a boundary.
Velocity velocity_from_pressure(const PressureField& field);

enum class OutletCondition { zero_gradient, fixed_zero };

struct ConcentrationOptions {
  OutletCondition outlet = OutletCondition::zero_gradient;
  double inlet_concentration = 1.0;
  double diffusion = 1.0;
  double reaction_rate = 0.25;
  double tolerance = 1e-7;
  int max_iterations = 20000;
};

/// Cells where the surface reacts: partially dissolved cells and solid cells
/// touching open pore space (eps > 0.99), excluding fully open cells.
StateMap reactive_mask(const StateMap& eps);

struct ConcentrationField {
  StateMap concentration;
  double max_residual = 0.0;
  int iterations = 0;
};

/// Steady upwind advection + 5-point diffusion + first-order sink on `sink_mask`.
/// Column 0 is held at the inlet concentration. Diffusion across a face uses
/// D * (mean eps of the two cells + 1e-3). `scale` multiplies the face fluxes.
ConcentrationField steady_concentration(const StateMap& eps, const PressureField& field, double flux_scale,
                                        const StateMap& sink_mask, const ConcentrationOptions& options);
ConcentrationField steady_concentration(const StateMap& eps, const PressureField& field, double flux_scale,
                                        const ConcentrationOptions& options);

/// Discrete residual of the concentration operator at every cell (0 on inlet cells).
std::vector<double> concentration_residual(const StateMap& eps, const PressureField& field, double flux_scale,
                                           const StateMap& sink_mask, const ConcentrationOptions& options,
                                           const StateMap& concentration);

/// eps' = min(1, eps + dt * r * C) on reactive cells with C >= 1e-4; eps never decreases.
StateMap step_eps(const StateMap& eps, const StateMap& concentration, double dt, double reaction_rate);

/// One dissolution trajectory: records (C, eps, Ux, Uy) at every step.
/// Recorded values are rounded to float precision so the in-memory result
/// equals what the native file format stores.
Simulation generate_simulation(const SynthConfig& cfg, const std::string& id = "sim");

}  // namespace rdstack::synth
