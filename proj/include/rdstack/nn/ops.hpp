#pragma once

#include <vector>

#include "rdstack/nn/tensor.hpp"

namespace rdstack::nn {

struct ConvOptions {
  int stride = 1;
  /// -1 means "same" padding for stride 1: dilation * (k - 1) / 2.
  int padding = -1;
  int dilation = 1;
  int groups = 1;
};

/// x [N, Cin, H, W], weight [Cout, Cin / groups, kh, kw], bias [1, Cout, 1, 1] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvOptions& options = {});

/// Truncated Fourier-space channel mixing; weights [Cin, Cout, 2 * modes_h - 1, modes_w].
Tensor spectral_conv(const Tensor& x, const Tensor& weight_re, const Tensor& weight_im, int modes_h, int modes_w);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
/// log(c / (1 - c)) with c = clamp(x, eps, 1 - eps); zero gradient where clamped.
Tensor logit(const Tensor& x, double eps);

/// x [N, C, H, W] times per-channel w [1, C, 1, 1].
Tensor mul_channel(const Tensor& x, const Tensor& w);
/// y[:, c] = x[:, c] * scale[c % P] + offset[c % P] with P = scale.size();
/// the constants are not trained.
Tensor affine_channels(const Tensor& x, const std::vector<double>& scale, const std::vector<double>& offset);
/// x [N, C, H, W] times per-sample, per-channel g [N, C, 1, 1].
Tensor mul_gate(const Tensor& x, const Tensor& g);
/// [N, C, H, W] -> [N, C, 1, 1].
Tensor global_avg_pool(const Tensor& x);
/// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, int begin, int count);
/// Reinterprets the same contiguous values under another shape.
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean of squared differences over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace rdstack::nn
