#include "rdstack/bulk.hpp"

#include <cmath>
#include <sstream>

#include "rdstack/error.hpp"
#include "rdstack/synth_sim.hpp"

namespace rdstack {

double porosity(const StateMap& eps) {
  if (eps.size() == 0) fail(ErrorCategory::invalid_argument, "porosity of an empty map");
  double acc = 0.0;
  for (double v : eps.values()) acc += v;
  return acc / static_cast<double>(eps.size());
}

Permeability permeability_proxy(const StateMap& eps, double exponent, double k_min) {
  if (eps.width() < 2) fail(ErrorCategory::invalid_argument, "permeability needs at least two columns");
  if (!synth::percolates(eps)) return {0.0, false};
  const synth::PressureField field = synth::solve_pressure(eps, synth::PressureBC{1.0, 0.0}, exponent, k_min);
  const double gradient = 1.0 / (eps.width() - 1);
  return {field.outlet_flux() / eps.height() / gradient, true};
}

std::string_view bulk_property_name(BulkProperty property) noexcept {
  return property == BulkProperty::porosity ? "porosity" : "permeability";
}

std::string BulkSeries::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,truth";
  for (const auto& [name, values] : variants) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << steps[i] << ',' << truth[i];
    for (const auto& [name, values] : variants) out << ',' << values[i];
    out << '\n';
  }
  return out.str();
}

std::vector<int> default_bulk_steps() {
  std::vector<int> steps;
  for (int s = 5; s <= 95; s += 10) steps.push_back(s);
  return steps;
}

std::vector<int> bulk_steps_within(int total_steps) {
  std::vector<int> steps;
  for (int s : default_bulk_steps()) {
    if (s < total_steps) steps.push_back(s);
  }
  return steps;
}

std::vector<BulkSeries> bulk_series(const Simulation& truth, const std::map<std::string, const Simulation*>& variants,
                                    std::span<const int> steps) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i] <= steps[i - 1]) fail(ErrorCategory::invalid_argument, "bulk steps must increase");
  }
  auto check = [&](const Simulation& sim, const std::string& name) {
    for (int s : steps) {
      if (s < 0 || s >= sim.steps()) {
        fail(ErrorCategory::data, name + " has no step " + std::to_string(s) + " (" + std::to_string(sim.steps()) +
                                      " steps)");
      }
    }
  };
  check(truth, "truth " + truth.id);
  for (const auto& [name, sim] : variants) check(*sim, "variant " + name);

  std::vector<BulkSeries> out(2);
  out[0].property = BulkProperty::porosity;
  out[1].property = BulkProperty::permeability;
  auto evaluate = [&](const Simulation& sim, std::vector<double>& por, std::vector<double>& perm) {
    for (int s : steps) {
      const StateMap& eps = sim.map(s, Channel::Eps);
      por.push_back(porosity(eps));
      perm.push_back(permeability_proxy(eps).value);
    }
  };
  for (BulkSeries& b : out) b.steps.assign(steps.begin(), steps.end());
  evaluate(truth, out[0].truth, out[1].truth);
  for (const auto& [name, sim] : variants) evaluate(*sim, out[0].variants[name], out[1].variants[name]);
  return out;
}

std::vector<double> rmse_series(const std::vector<std::vector<double>>& predicted,
                                const std::vector<std::vector<double>>& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    fail(ErrorCategory::invalid_argument, "rmse_series needs matched, non-empty sample lists");
  }
  const std::size_t steps = truth.front().size();
  std::vector<double> acc(steps, 0.0);
  for (std::size_t s = 0; s < truth.size(); ++s) {
    if (predicted[s].size() != steps || truth[s].size() != steps) {
      fail(ErrorCategory::shape_mismatch, "series are not aligned");
    }
    for (std::size_t i = 0; i < steps; ++i) acc[i] += (predicted[s][i] - truth[s][i]) * (predicted[s][i] - truth[s][i]);
  }
  for (double& v : acc) v = std::sqrt(v / static_cast<double>(truth.size()));
  return acc;
}

}  // namespace rdstack
