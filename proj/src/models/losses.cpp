#include "rdstack/models/losses.hpp"

#include <algorithm>
#include <cmath>

#include "rdstack/error.hpp"
#include "rdstack/nn/ops.hpp"

namespace rdstack::models {

using nn::Tensor;

namespace {

void log_softmax(std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  const double lse = top + std::log(acc);
  for (double& x : v) x -= lse;
}

}  // namespace

Tensor tau_loss(const Tensor& pred, const Tensor& target, int n, double alpha, KlDirection direction) {
  if (n < 2) fail(ErrorCategory::invalid_argument, "tau_loss needs n >= 2");
  if (!(pred.shape() == target.shape())) {
    fail(ErrorCategory::shape_mismatch, "tau_loss: " + pred.shape().str() + " vs " + target.shape().str());
  }
  const nn::Shape s = pred.shape();
  if (s.c % n != 0) fail(ErrorCategory::shape_mismatch, "tau_loss: channels not divisible by n");
  const std::size_t frame = static_cast<std::size_t>(s.c / n) * s.plane();
  const std::size_t sample = frame * n;
  const auto p = pred.data();
  const auto y = target.data();

  // Gradients w.r.t. pred and target, per unit loss.
  std::vector<double> gp(p.size(), 0.0);
  std::vector<double> gy(p.size(), 0.0);
  double total = 0.0;
  std::vector<double> lp(frame), ly(frame);
  for (int b = 0; b < s.n; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * sample;
    for (std::size_t i = 0; i < sample; ++i) {
      const double d = p[base + i] - y[base + i];
      total += d * d;
      gp[base + i] += 2.0 * d;
      gy[base + i] -= 2.0 * d;
    }
    if (alpha == 0.0) continue;
    for (int k = 0; k + 1 < n; ++k) {
      const std::size_t f0 = base + static_cast<std::size_t>(k) * frame;
      const std::size_t f1 = f0 + frame;
      for (std::size_t i = 0; i < frame; ++i) {
        lp[i] = p[f1 + i] - p[f0 + i];
        ly[i] = y[f1 + i] - y[f0 + i];
      }
      log_softmax(lp);
      log_softmax(ly);
      // KL(P || Q) = sum P (log P - log Q); dKL/dlogitsQ = Q - P, dKL/dlogitsP = P (log P - log Q - KL).
      const bool true_first = direction == KlDirection::true_to_pred;
      const std::vector<double>& lP = true_first ? ly : lp;
      const std::vector<double>& lQ = true_first ? lp : ly;
      double kl = 0.0;
      for (std::size_t i = 0; i < frame; ++i) kl += std::exp(lP[i]) * (lP[i] - lQ[i]);
      total += alpha * kl;
      std::vector<double>& gP = true_first ? gy : gp;
      std::vector<double>& gQ = true_first ? gp : gy;
      for (std::size_t i = 0; i < frame; ++i) {
        const double P = std::exp(lP[i]);
        const double Q = std::exp(lQ[i]);
        const double dq = alpha * (Q - P);
        const double dp = alpha * P * (lP[i] - lQ[i] - kl);
        gQ[f1 + i] += dq;
        gQ[f0 + i] -= dq;
        gP[f1 + i] += dp;
        gP[f0 + i] -= dp;
      }
    }
  }
  const double inv_b = 1.0 / s.n;
  return nn::make_result(nn::Shape{}, {total * inv_b}, {pred, target},
                         [gp = std::move(gp), gy = std::move(gy), inv_b](nn::detail::Node& self) {
                           const double g = self.grad[0] * inv_b;
                           for (std::size_t k = 0; k < 2; ++k) {
                             auto& parent = *self.parents[k];
                             if (!parent.requires_grad) continue;
                             auto& dst = parent.ensure_grad();
                             const auto& src = k == 0 ? gp : gy;
                             for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * src[i];
                           }
                         });
}

Tensor family_loss(const ModelSpec& spec, const Tensor& pred, const Tensor& target) {
  if (spec.family == Family::tau) return tau_loss(pred, target, spec.n, spec.tau_alpha, spec.kl_direction);
  return nn::mse_loss(pred, target);
}

}  // namespace rdstack::models
