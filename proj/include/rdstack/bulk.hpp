#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rdstack/core_data.hpp"

namespace rdstack {

/// Spatial mean of eps.
double porosity(const StateMap& eps);

struct Permeability {
  double value = 0.0;
  bool percolating = false;
};

/// Dimensionless Darcy permeability of the synthetic conductivity law: unit
/// pressure drop between the first and last columns, outlet flux divided by
/// the cross-section (H) and the pressure gradient (1 / (W - 1)). Returns 0
/// with percolating = false when no eps > 0.5 path joins inlet and outlet.
/// Not comparable with permeabilities from a Stokes solver.
Permeability permeability_proxy(const StateMap& eps, double exponent = 3.0, double k_min = 1e-4);

enum class BulkProperty { porosity, permeability };
std::string_view bulk_property_name(BulkProperty property) noexcept;

struct BulkSeries {
  BulkProperty property = BulkProperty::porosity;
  std::vector<int> steps;
  std::vector<double> truth;
  std::map<std::string, std::vector<double>> variants;

  /// "step,truth,<variant>..." rows.
  std::string to_csv() const;
};

/// 5, 15, ..., 95.
std::vector<int> default_bulk_steps();
/// The default steps that exist in a trajectory of `total_steps` states.
std::vector<int> bulk_steps_within(int total_steps);

/// Porosity and permeability series (in that order) of the truth and of
/// every variant trajectory at the given steps.
std::vector<BulkSeries> bulk_series(const Simulation& truth, const std::map<std::string, const Simulation*>& variants,
                                    std::span<const int> steps);

/// Per step, sqrt(mean over samples of (pred - truth)^2). Rows are samples.
std::vector<double> rmse_series(const std::vector<std::vector<double>>& predicted,
                                const std::vector<std::vector<double>>& truth);

}  // namespace rdstack
