#include "rdstack/models/tau.hpp"

#include <algorithm>
#include <random>

#include "rdstack/error.hpp"
#include "rdstack/nn/ops.hpp"

namespace rdstack::models {

using nn::Shape;
using nn::Tensor;

namespace {

void make_conv(nn::ParameterStore& store, std::mt19937_64& rng, const std::string& name, int out_c, int in_c_per_group,
               int k, Tensor& weight, Tensor& bias) {
  weight = store.create(name + ".weight", Shape{out_c, in_c_per_group, k, k},
                        nn::fan_in_bound(in_c_per_group * k * k), rng);
  bias = store.create_constant(name + ".bias", Shape{1, out_c, 1, 1}, 0.0);
}

}  // namespace

TauBlockParams make_tau_block(nn::ParameterStore& store, const std::string& prefix, int channels, int reduced,
                              std::mt19937_64& rng) {
  TauBlockParams p;
  const int c = channels;
  make_conv(store, rng, prefix + ".proj_in", c, c, 1, p.proj_in_w, p.proj_in_b);
  make_conv(store, rng, prefix + ".dw", c, 1, 5, p.dw_w, p.dw_b);
  make_conv(store, rng, prefix + ".dwd", c, 1, 3, p.dwd_w, p.dwd_b);
  make_conv(store, rng, prefix + ".pw", c, c, 1, p.pw_w, p.pw_b);
  make_conv(store, rng, prefix + ".fc1", reduced, c, 1, p.fc1_w, p.fc1_b);
  make_conv(store, rng, prefix + ".fc2", c, reduced, 1, p.fc2_w, p.fc2_b);
  make_conv(store, rng, prefix + ".proj_out", c, c, 1, p.proj_out_w, p.proj_out_b);
  make_conv(store, rng, prefix + ".mlp1", 2 * c, c, 1, p.mlp1_w, p.mlp1_b);
  make_conv(store, rng, prefix + ".mlp2", c, 2 * c, 1, p.mlp2_w, p.mlp2_b);
  return p;
}

Tensor tau_attention(const Tensor& u, const TauBlockParams& p, Tensor* gate_out) {
  const int c = u.shape().c;
  Tensor a = nn::conv2d(u, p.dw_w, p.dw_b, {.groups = c});
  a = nn::conv2d(a, p.dwd_w, p.dwd_b, {.dilation = 3, .groups = c});
  const Tensor statics = nn::conv2d(a, p.pw_w, p.pw_b);
  const Tensor pooled = nn::global_avg_pool(u);
  const Tensor gate = nn::sigmoid(nn::conv2d(nn::relu(nn::conv2d(pooled, p.fc1_w, p.fc1_b)), p.fc2_w, p.fc2_b));
  if (gate_out) *gate_out = gate;
  return nn::mul_gate(nn::mul(statics, u), gate);
}

Tensor tau_block(const Tensor& x, const TauBlockParams& p, Tensor* gate_out) {
  Tensor y = nn::gelu(nn::conv2d(x, p.proj_in_w, p.proj_in_b));
  y = nn::conv2d(tau_attention(y, p, gate_out), p.proj_out_w, p.proj_out_b);
  Tensor out = nn::add(x, y);
  const Tensor z = nn::conv2d(nn::gelu(nn::conv2d(out, p.mlp1_w, p.mlp1_b)), p.mlp2_w, p.mlp2_b);
  return nn::add(out, z);
}

TauModel::TauModel(const ModelSpec& spec, std::uint64_t seed) : SequenceModel(spec) {
  if (spec_.family != Family::tau) fail(ErrorCategory::config, "TauModel needs family tau");
  std::mt19937_64 rng(seed);
  const int hs = spec_.hidden;
  const int k = spec_.kernel;
  make_conv(params_, rng, "enc1", hs, spec_.in_channels, k, enc1_w_, enc1_b_);
  make_conv(params_, rng, "enc2", hs, hs, k, enc2_w_, enc2_b_);
  const int channels = spec_.m * hs;
  const int reduced = std::max(channels / 4, 4);
  for (int b = 0; b < spec_.tau_blocks; ++b) {
    blocks_.push_back(make_tau_block(params_, "block." + std::to_string(b), channels, reduced, rng));
  }
  make_conv(params_, rng, "dec1", hs, hs, k, dec1_w_, dec1_b_);
  make_conv(params_, rng, "dec2", hs, 2 * hs, k, dec2_w_, dec2_b_);
  make_conv(params_, rng, "readout", spec_.n * spec_.out_channels, spec_.m * hs, 1, readout_w_, readout_b_);
}

Tensor TauModel::run(const Tensor& x, std::vector<Tensor>* gates) const {
  const Shape s = x.shape();
  const int hs = spec_.hidden;
  const int m = spec_.m;
  // [B, m * C, H, W] and [B * m, C, H, W] share layout.
  const Tensor frames = nn::reshape(x, Shape{s.n * m, spec_.in_channels, s.h, s.w});
  const Tensor skip = nn::gelu(nn::conv2d(frames, enc1_w_, enc1_b_));
  const int pad = spec_.kernel / 2;
  const Tensor latent = nn::gelu(nn::conv2d(skip, enc2_w_, enc2_b_, {.stride = 2, .padding = pad}));

  const Shape ls = latent.shape();
  Tensor z = nn::reshape(latent, Shape{s.n, m * hs, ls.h, ls.w});
  for (const TauBlockParams& p : blocks_) {
    Tensor gate;
    z = tau_block(z, p, gates ? &gate : nullptr);
    if (gates) gates->push_back(gate);
  }
  z = nn::reshape(z, ls);

  Tensor d = nn::gelu(nn::conv2d(nn::upsample2(z), dec1_w_, dec1_b_));
  d = nn::gelu(nn::conv2d(nn::concat_channels({d, skip}), dec2_w_, dec2_b_));
  d = nn::reshape(d, Shape{s.n, m * hs, s.h, s.w});
  return nn::conv2d(d, readout_w_, readout_b_);
}

Tensor TauModel::forward_impl(const Tensor& x) const { return run(x, nullptr); }

std::vector<Tensor> TauModel::gates(const Tensor& x) const {
  spec_.validate_grid(x.shape().h, x.shape().w);
  std::vector<Tensor> out;
  run(x, &out);
  return out;
}

}  // namespace rdstack::models
