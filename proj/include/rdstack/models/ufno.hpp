#pragma once

#include <cstdint>
#include <vector>

#include "rdstack/models/model.hpp"

namespace rdstack::models {

/// Two-level contracting/expanding convolutional path used inside a
/// U-Fourier layer. Keeps the channel count and spatial size.
struct UNetParams {
  nn::Tensor down1_w, down1_b;  // stride 2
  nn::Tensor down2_w, down2_b;  // stride 2
  nn::Tensor up1_w, up1_b;      // on concat(upsample(d2), d1)
  nn::Tensor up0_w, up0_b;      // on concat(upsample(u1), x)
};

nn::Tensor unet_forward(const nn::Tensor& x, const UNetParams& p);

struct FourierLayerParams {
  nn::Tensor spectral_re, spectral_im;
  nn::Tensor bypass_w, bypass_b;  // 1 x 1
  bool has_unet = false;
  UNetParams unet;
};

/// gelu(spectral(x) [+ unet(x)] + bypass(x)).
nn::Tensor fourier_layer(const nn::Tensor& x, const FourierLayerParams& p, int modes);

/// Time is folded into channels: the m input frames plus two grid-coordinate
/// planes are lifted to `hidden` channels, passed through `fourier_layers`
/// plain and `ufourier_layers` U-Fourier layers and projected to the n
/// output frames.
class UfnoModel final : public SequenceModel {
 public:
  UfnoModel(const ModelSpec& spec, std::uint64_t seed);

 protected:
  nn::Tensor forward_impl(const nn::Tensor& x) const override;
  std::vector<std::string> output_layer() const override { return {"proj2.weight", "proj2.bias"}; }

 private:
  nn::Tensor lift_w_, lift_b_;
  std::vector<FourierLayerParams> layers_;
  nn::Tensor proj1_w_, proj1_b_, proj2_w_, proj2_b_;
};

}  // namespace rdstack::models
