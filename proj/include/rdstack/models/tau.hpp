#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rdstack/models/model.hpp"

namespace rdstack::models {

/// One temporal attention block acting on frames stacked along channels.
struct TauBlockParams {
  nn::Tensor proj_in_w, proj_in_b;      // 1 x 1
  nn::Tensor dw_w, dw_b;                // depthwise 5 x 5
  nn::Tensor dwd_w, dwd_b;              // depthwise 3 x 3, dilation 3
  nn::Tensor pw_w, pw_b;                // pointwise
  nn::Tensor fc1_w, fc1_b, fc2_w, fc2_b;  // channel gate on the pooled map
  nn::Tensor proj_out_w, proj_out_b;    // 1 x 1
  nn::Tensor mlp1_w, mlp1_b, mlp2_w, mlp2_b;
};

/// Creates the parameters of a block with `channels` channels and a gate
/// bottleneck of `reduced` channels.
TauBlockParams make_tau_block(nn::ParameterStore& store, const std::string& prefix, int channels, int reduced,
                              std::mt19937_64& rng);

/// Attention sub-layer: u * static(u) * gate(u), where static is the
/// depthwise / dilated depthwise / pointwise stack and gate is
/// sigmoid(fc2(relu(fc1(avgpool)))). When `gate_out` is given it receives the
/// gate values [N, C, 1, 1].
nn::Tensor tau_attention(const nn::Tensor& u, const TauBlockParams& p, nn::Tensor* gate_out = nullptr);

/// Full block: x + proj_out(attention(gelu(proj_in(x)))), then x + mlp(x).
nn::Tensor tau_block(const nn::Tensor& x, const TauBlockParams& p, nn::Tensor* gate_out = nullptr);

/// Per-frame convolutional encoder (one stride-2 stage), translator of
/// attention blocks over the m encoded frames folded into channels, and
/// per-frame decoder with an encoder skip. A 1 x 1 readout maps the m decoded
/// frames to the n outputs.
class TauModel final : public SequenceModel {
 public:
  TauModel(const ModelSpec& spec, std::uint64_t seed);

  /// Gates of every block from a forward pass on `x`.
  std::vector<nn::Tensor> gates(const nn::Tensor& x) const;

 protected:
  nn::Tensor forward_impl(const nn::Tensor& x) const override;
  std::vector<std::string> output_layer() const override { return {"readout.weight", "readout.bias"}; }

 private:
  nn::Tensor run(const nn::Tensor& x, std::vector<nn::Tensor>* gates) const;

  nn::Tensor enc1_w_, enc1_b_, enc2_w_, enc2_b_;
  std::vector<TauBlockParams> blocks_;
  nn::Tensor dec1_w_, dec1_b_, dec2_w_, dec2_b_;
  nn::Tensor readout_w_, readout_b_;
};

}  // namespace rdstack::models
