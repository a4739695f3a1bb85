#include "rdstack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rdstack/error.hpp"

namespace rdstack {

namespace {

void require_same_shape(const StateMap& a, const StateMap& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCategory::shape_mismatch, std::string(op) + ": " + std::to_string(a.height()) + "x" +
                                            std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                                            std::to_string(b.width()));
  }
}

}  // namespace

std::optional<double> pcc(const StateMap& pred, const StateMap& truth) {
  require_same_shape(pred, truth, "pcc");
  const auto p = pred.values();
  const auto t = truth.values();
  const double count = static_cast<double>(p.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mt += t[i];
  }
  mp /= count;
  mt /= count;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] - mp;
    const double b = t[i] - mt;
    cov += a * b;
    vp += a * a;
    vt += b * b;
  }
  if (vp <= 0.0 || vt <= 0.0) return std::nullopt;
  return std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
}

double mse_map(const StateMap& pred, const StateMap& truth) {
  require_same_shape(pred, truth, "mse_map");
  const auto p = pred.values();
  const auto t = truth.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

StateMap difference_map(const StateMap& pred, const StateMap& truth) {
  require_same_shape(pred, truth, "difference_map");
  StateMap out(pred.channel(), pred.height(), pred.width());
  const auto p = pred.values();
  const auto t = truth.values();
  auto o = out.values();
  for (std::size_t i = 0; i < p.size(); ++i) o[i] = p[i] - t[i];
  return out;
}

std::string_view metric_name(Metric metric) noexcept { return metric == Metric::pcc ? "pcc" : "mse"; }

std::string MetricCurve::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,value,count\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << steps[i] << ',';
    if (std::isnan(values[i])) {
      out << "nan";
    } else {
      out << values[i];
    }
    out << ',' << counts[i] << '\n';
  }
  return out.str();
}

std::vector<MetricCurve> curves(std::span<const RolloutResult> results, std::span<const Simulation> truths) {
  if (results.size() != truths.size() || results.empty()) {
    fail(ErrorCategory::invalid_argument, "curves need matched, non-empty result and truth lists");
  }
  const int first = results.front().first_predicted();
  const int last = results.front().steps();
  for (std::size_t s = 0; s < results.size(); ++s) {
    const RolloutResult& r = results[s];
    if (r.trajectory.id != truths[s].id) {
      fail(ErrorCategory::invalid_argument, "result " + r.trajectory.id + " paired with truth " + truths[s].id);
    }
    if (r.first_predicted() != first || r.steps() != last) {
      fail(ErrorCategory::shape_mismatch, "rollouts cover different step ranges");
    }
    if (truths[s].steps() < last) fail(ErrorCategory::shape_mismatch, "truth " + truths[s].id + " is too short");
  }

  std::vector<MetricCurve> out;
  for (Metric metric : {Metric::pcc, Metric::mse}) {
    for (Channel c : kPhysicalChannels) {
      MetricCurve curve;
      curve.channel = c;
      curve.metric = metric;
      for (int step = first; step < last; ++step) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t s = 0; s < results.size(); ++s) {
          const StateMap& p = results[s].trajectory.map(step, c);
          const StateMap& t = truths[s].map(step, c);
          if (metric == Metric::pcc) {
            if (const auto v = pcc(p, t)) {
              sum += *v;
              ++count;
            }
          } else {
            sum += mse_map(p, t);
            ++count;
          }
        }
        curve.steps.push_back(step);
        curve.values.push_back(count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN());
        curve.counts.push_back(count);
      }
      out.push_back(std::move(curve));
    }
  }
  return out;
}

}  // namespace rdstack
