#include "rdstack/models/ufno.hpp"

#include <random>

#include "rdstack/error.hpp"
#include "rdstack/nn/ops.hpp"

namespace rdstack::models {

using nn::Shape;
using nn::Tensor;

namespace {

Tensor grid_coordinates(int batch, int h, int w) {
  std::vector<double> v(static_cast<std::size_t>(batch) * 2 * h * w);
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const std::size_t base = static_cast<std::size_t>(b) * 2 * h * w + static_cast<std::size_t>(i) * w + j;
        v[base] = h > 1 ? static_cast<double>(i) / (h - 1) : 0.0;
        v[base + static_cast<std::size_t>(h) * w] = w > 1 ? static_cast<double>(j) / (w - 1) : 0.0;
      }
    }
  }
  return Tensor::from(Shape{batch, 2, h, w}, std::move(v));
}

}  // namespace

Tensor unet_forward(const Tensor& x, const UNetParams& p) {
  const nn::ConvOptions down{.stride = 2, .padding = 1};
  const Tensor d1 = nn::gelu(nn::conv2d(x, p.down1_w, p.down1_b, down));
  const Tensor d2 = nn::gelu(nn::conv2d(d1, p.down2_w, p.down2_b, down));
  const Tensor u1 = nn::gelu(nn::conv2d(nn::concat_channels({nn::upsample2(d2), d1}), p.up1_w, p.up1_b));
  return nn::conv2d(nn::concat_channels({nn::upsample2(u1), x}), p.up0_w, p.up0_b);
}

Tensor fourier_layer(const Tensor& x, const FourierLayerParams& p, int modes) {
  Tensor y = nn::add(nn::spectral_conv(x, p.spectral_re, p.spectral_im, modes, modes),
                     nn::conv2d(x, p.bypass_w, p.bypass_b));
  if (p.has_unet) y = nn::add(y, unet_forward(x, p.unet));
  return nn::gelu(y);
}

UfnoModel::UfnoModel(const ModelSpec& spec, std::uint64_t seed) : SequenceModel(spec) {
  if (spec_.family != Family::ufno) fail(ErrorCategory::config, "UfnoModel needs family ufno");
  std::mt19937_64 rng(seed);
  const int w = spec_.hidden;
  const int lift_in = spec_.m * spec_.in_channels + 2;
  lift_w_ = params_.create("lift.weight", Shape{w, lift_in, 1, 1}, nn::fan_in_bound(lift_in), rng);
  lift_b_ = params_.create_constant("lift.bias", Shape{1, w, 1, 1}, 0.0);

  const Shape spectral{w, w, 2 * spec_.modes - 1, spec_.modes};
  const double spectral_bound = 1.0 / w;
  auto conv = [&](const std::string& name, int out_c, int in_c, int k, Tensor& weight, Tensor& bias) {
    weight = params_.create(name + ".weight", Shape{out_c, in_c, k, k}, nn::fan_in_bound(in_c * k * k), rng);
    bias = params_.create_constant(name + ".bias", Shape{1, out_c, 1, 1}, 0.0);
  };
  const int total = spec_.fourier_layers + spec_.ufourier_layers;
  for (int l = 0; l < total; ++l) {
    const std::string prefix = "layer." + std::to_string(l);
    FourierLayerParams p;
    p.spectral_re = params_.create(prefix + ".spectral_re", spectral, spectral_bound, rng);
    p.spectral_im = params_.create(prefix + ".spectral_im", spectral, spectral_bound, rng);
    conv(prefix + ".bypass", w, w, 1, p.bypass_w, p.bypass_b);
    p.has_unet = l >= spec_.fourier_layers;
    if (p.has_unet) {
      conv(prefix + ".unet.down1", w, w, 3, p.unet.down1_w, p.unet.down1_b);
      conv(prefix + ".unet.down2", w, w, 3, p.unet.down2_w, p.unet.down2_b);
      conv(prefix + ".unet.up1", w, 2 * w, 3, p.unet.up1_w, p.unet.up1_b);
      conv(prefix + ".unet.up0", w, 2 * w, 3, p.unet.up0_w, p.unet.up0_b);
    }
    layers_.push_back(p);
  }
  conv("proj1", 2 * w, w, 1, proj1_w_, proj1_b_);
  conv("proj2", spec_.n * spec_.out_channels, 2 * w, 1, proj2_w_, proj2_b_);
}

Tensor UfnoModel::forward_impl(const Tensor& x) const {
  const Shape s = x.shape();
  Tensor y = nn::conv2d(nn::concat_channels({x, grid_coordinates(s.n, s.h, s.w)}), lift_w_, lift_b_);
  for (const FourierLayerParams& p : layers_) y = fourier_layer(y, p, spec_.modes);
  y = nn::gelu(nn::conv2d(y, proj1_w_, proj1_b_));
  return nn::conv2d(y, proj2_w_, proj2_b_);
}

}  // namespace rdstack::models
