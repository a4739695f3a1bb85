#include "rdstack/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rdstack/error.hpp"
#include "rdstack/nn/kernels.hpp"

namespace rdstack::nn {

namespace {

using detail::Node;

/// Gradient buffer of parent `i`, or nullptr when it does not need one.
std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

const std::vector<double>& parent_value(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    fail(ErrorCategory::shape_mismatch, std::string(op) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& xin = parent_value(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i] * deriv(xin[i], self.value[i]);
  });
}

kernels::ConvGeometry conv_geometry(const Tensor& x, const Tensor& weight, const ConvOptions& o) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  kernels::ConvGeometry g;
  g.batch = xs.n;
  g.in_c = xs.c;
  g.in_h = xs.h;
  g.in_w = xs.w;
  g.out_c = ws.n;
  g.k_h = ws.h;
  g.k_w = ws.w;
  g.stride = o.stride;
  g.dilation = o.dilation;
  g.groups = o.groups;
  g.pad_h = o.padding >= 0 ? o.padding : o.dilation * (ws.h - 1) / 2;
  g.pad_w = o.padding >= 0 ? o.padding : o.dilation * (ws.w - 1) / 2;
  g.validate();
  if (ws.c * o.groups != xs.c) {
    fail(ErrorCategory::shape_mismatch, "conv2d: weight " + ws.str() + " does not fit input " + xs.str());
  }
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvOptions& options) {
  const kernels::ConvGeometry g = conv_geometry(x, weight, options);
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(g.out_c)) {
    fail(ErrorCategory::shape_mismatch, "conv2d: bias " + bias.shape().str() + " for " + std::to_string(g.out_c) + " outputs");
  }
  std::vector<double> out(g.output_size());
  kernels::conv2d_forward(g, x.data(), weight.data(), bias.defined() ? bias.data() : std::span<const double>{}, out);
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(Shape{g.batch, g.out_c, g.out_h(), g.out_w()}, std::move(out), std::move(parents),
                     [g](Node& self) {
                       const auto& xin = parent_value(self, 0);
                       const auto& w = parent_value(self, 1);
                       if (auto* gx = parent_grad(self, 0)) kernels::conv2d_backward_input(g, self.grad, w, *gx);
                       auto* gw = parent_grad(self, 1);
                       std::vector<double>* gb = self.parents.size() > 2 ? parent_grad(self, 2) : nullptr;
                       if (gw) {
                         kernels::conv2d_backward_weight(g, xin, self.grad, *gw,
                                                         gb ? std::span<double>(*gb) : std::span<double>{});
                       } else if (gb) {
                         std::vector<double> scratch(g.weight_size());
                         kernels::conv2d_backward_weight(g, xin, self.grad, scratch, *gb);
                       }
                     });
}

Tensor spectral_conv(const Tensor& x, const Tensor& weight_re, const Tensor& weight_im, int modes_h, int modes_w) {
  require_same(weight_re, weight_im, "spectral_conv weights");
  kernels::SpectralGeometry g;
  g.batch = x.shape().n;
  g.in_c = x.shape().c;
  g.h = x.shape().h;
  g.w = x.shape().w;
  g.out_c = weight_re.shape().c;
  g.modes_h = modes_h;
  g.modes_w = modes_w;
  g.validate();
  const Shape expected{g.in_c, g.out_c, g.weight_rows(), g.modes_w};
  if (!(weight_re.shape() == expected)) {
    fail(ErrorCategory::shape_mismatch, "spectral_conv: weights " + weight_re.shape().str() + ", expected " + expected.str());
  }
  std::vector<double> out(static_cast<std::size_t>(g.batch) * g.out_c * g.h * g.w);
  kernels::spectral_forward(g, x.data(), weight_re.data(), weight_im.data(), out);
  return make_result(Shape{g.batch, g.out_c, g.h, g.w}, std::move(out), {x, weight_re, weight_im}, [g](Node& self) {
    auto* gx = parent_grad(self, 0);
    auto* gwr = parent_grad(self, 1);
    auto* gwi = parent_grad(self, 2);
    std::vector<double> sx, swr, swi;
    if (!gx) sx.assign(parent_value(self, 0).size(), 0.0);
    if (!gwr) swr.assign(parent_value(self, 1).size(), 0.0);
    if (!gwi) swi.assign(parent_value(self, 2).size(), 0.0);
    kernels::spectral_backward(g, parent_value(self, 0), parent_value(self, 1), parent_value(self, 2), self.grad,
                               gx ? *gx : sx, gwr ? *gwr : swr, gwi ? *gwi : swi);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = parent_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& x = parent_value(self, 0);
    const auto& y = parent_value(self, 1);
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * y[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [=](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [=](double v, double) { return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor logit(const Tensor& x, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) fail(ErrorCategory::invalid_argument, "logit: eps must be in (0, 0.5)");
  return unary(
      x,
      [eps](double v) {
        const double c = std::clamp(v, eps, 1.0 - eps);
        return std::log(c / (1.0 - c));
      },
      [eps](double v, double) { return v > eps && v < 1.0 - eps ? 1.0 / (v * (1.0 - v)) : 0.0; });
}

Tensor mul_channel(const Tensor& x, const Tensor& w) {
  const Shape s = x.shape();
  if (!(w.shape() == Shape{1, s.c, 1, 1})) {
    fail(ErrorCategory::shape_mismatch, "mul_channel: " + w.shape().str() + " for input " + s.str());
  }
  const std::size_t plane = s.plane();
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  const auto wv = w.data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const double f = wv[nc % static_cast<std::size_t>(s.c)];
    for (std::size_t k = 0; k < plane; ++k) out[nc * plane + k] = xv[nc * plane + k] * f;
  }
  return make_result(s, std::move(out), {x, w}, [s, plane](Node& self) {
    const auto& xv = parent_value(self, 0);
    const auto& wv = parent_value(self, 1);
    auto* gx = parent_grad(self, 0);
    auto* gw = parent_grad(self, 1);
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      const std::size_t c = nc % static_cast<std::size_t>(s.c);
      double acc = 0.0;
      for (std::size_t k = 0; k < plane; ++k) {
        const double g = self.grad[nc * plane + k];
        if (gx) (*gx)[nc * plane + k] += g * wv[c];
        acc += g * xv[nc * plane + k];
      }
      if (gw) (*gw)[c] += acc;
    }
  });
}

Tensor affine_channels(const Tensor& x, const std::vector<double>& scale, const std::vector<double>& offset) {
  const Shape s = x.shape();
  if (scale.empty() || scale.size() != offset.size() || s.c % static_cast<int>(scale.size()) != 0) {
    fail(ErrorCategory::shape_mismatch, "affine_channels: " + std::to_string(scale.size()) + " coefficients for " +
                                            s.str());
  }
  const std::size_t plane = s.plane();
  const std::size_t period = scale.size();
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    const std::size_t c = (nc % static_cast<std::size_t>(s.c)) % period;
    for (std::size_t k = 0; k < plane; ++k) out[nc * plane + k] = xv[nc * plane + k] * scale[c] + offset[c];
  }
  return make_result(s, std::move(out), {x}, [s, plane, scale](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      const double f = scale[(nc % static_cast<std::size_t>(s.c)) % scale.size()];
      for (std::size_t k = 0; k < plane; ++k) (*gx)[nc * plane + k] += self.grad[nc * plane + k] * f;
    }
  });
}

Tensor mul_gate(const Tensor& x, const Tensor& gate) {
  const Shape s = x.shape();
  if (!(gate.shape() == Shape{s.n, s.c, 1, 1})) {
    fail(ErrorCategory::shape_mismatch, "mul_gate: " + gate.shape().str() + " for input " + s.str());
  }
  const std::size_t plane = s.plane();
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  const auto gv = gate.data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    for (std::size_t k = 0; k < plane; ++k) out[nc * plane + k] = xv[nc * plane + k] * gv[nc];
  }
  return make_result(s, std::move(out), {x, gate}, [s, plane](Node& self) {
    const auto& xv = parent_value(self, 0);
    const auto& gv = parent_value(self, 1);
    auto* gx = parent_grad(self, 0);
    auto* gg = parent_grad(self, 1);
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      double acc = 0.0;
      for (std::size_t k = 0; k < plane; ++k) {
        const double g = self.grad[nc * plane + k];
        if (gx) (*gx)[nc * plane + k] += g * gv[nc];
        acc += g * xv[nc * plane + k];
      }
      if (gg) (*gg)[nc] += acc;
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  std::vector<double> out(static_cast<std::size_t>(s.n) * s.c);
  const auto xv = x.data();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += xv[nc * plane + k];
    out[nc] = acc / static_cast<double>(plane);
  }
  return make_result(Shape{s.n, s.c, 1, 1}, std::move(out), {x}, [plane](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
      const double g = self.grad[nc] * inv;
      for (std::size_t k = 0; k < plane; ++k) (*gx)[nc * plane + k] += g;
    }
  });
}

Tensor upsample2(const Tensor& x) {
  const Shape s = x.shape();
  const Shape o{s.n, s.c, s.h * 2, s.w * 2};
  std::vector<double> out(o.numel());
  const auto xv = x.data();
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
    for (int i = 0; i < o.h; ++i) {
      for (int j = 0; j < o.w; ++j) {
        out[nc * o.plane() + static_cast<std::size_t>(i) * o.w + j] =
            xv[nc * s.plane() + static_cast<std::size_t>(i / 2) * s.w + j / 2];
      }
    }
  }
  return make_result(o, std::move(out), {x}, [s, o](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(s.n) * s.c; ++nc) {
      for (int i = 0; i < o.h; ++i) {
        for (int j = 0; j < o.w; ++j) {
          (*gx)[nc * s.plane() + static_cast<std::size_t>(i / 2) * s.w + j / 2] +=
              self.grad[nc * o.plane() + static_cast<std::size_t>(i) * o.w + j];
        }
      }
    }
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorCategory::invalid_argument, "concat_channels: nothing to concatenate");
  Shape s = parts.front().shape();
  int channels = 0;
  for (const Tensor& t : parts) {
    const Shape& ps = t.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      fail(ErrorCategory::shape_mismatch, "concat_channels: " + ps.str() + " vs " + s.str());
    }
    channels += ps.c;
  }
  s.c = channels;
  const std::size_t plane = s.plane();
  std::vector<double> out(s.numel());
  std::vector<int> offsets;
  int offset = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(offset);
    const int pc = t.shape().c;
    const auto v = t.data();
    for (int b = 0; b < s.n; ++b) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b) * pc * plane), pc * plane,
                  out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * s.c + offset) * plane));
    }
    offset += pc;
  }
  return make_result(s, std::move(out), parts, [s, plane, offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto* g = parent_grad(self, k);
      if (!g) continue;
      const int pc = self.parents[k]->shape.c;
      for (int b = 0; b < s.n; ++b) {
        const double* src = self.grad.data() + (static_cast<std::size_t>(b) * s.c + offsets[k]) * plane;
        double* dst = g->data() + static_cast<std::size_t>(b) * pc * plane;
        for (std::size_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    fail(ErrorCategory::shape_mismatch, "slice_channels [" + std::to_string(begin) + ", +" + std::to_string(count) +
                                            ") of " + s.str());
  }
  const Shape o{s.n, count, s.h, s.w};
  const std::size_t plane = s.plane();
  std::vector<double> out(o.numel());
  const auto v = x.data();
  for (int b = 0; b < s.n; ++b) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * s.c + begin) * plane),
                count * plane, out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b) * count * plane));
  }
  return make_result(o, std::move(out), {x}, [s, begin, count, plane](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    for (int b = 0; b < s.n; ++b) {
      const double* src = self.grad.data() + static_cast<std::size_t>(b) * count * plane;
      double* dst = g->data() + (static_cast<std::size_t>(b) * s.c + begin) * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    fail(ErrorCategory::shape_mismatch, "reshape " + x.shape().str() + " -> " + shape.str());
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), {x}, [](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_result(Shape{}, {acc}, {x}, [](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    for (double& v : *g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same(pred, target, "mse_loss");
  const auto p = pred.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  const double inv = 1.0 / static_cast<double>(p.size());
  return make_result(Shape{}, {acc * inv}, {pred, target}, [inv](Node& self) {
    const auto& p = parent_value(self, 0);
    const auto& t = parent_value(self, 1);
    const double g = self.grad[0] * 2.0 * inv;
    if (auto* gp = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < p.size(); ++i) (*gp)[i] += g * (p[i] - t[i]);
    }
    if (auto* gt = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < p.size(); ++i) (*gt)[i] -= g * (p[i] - t[i]);
    }
  });
}

}  // namespace rdstack::nn
