#include "rdstack/models/convlstm.hpp"

#include <random>

#include "rdstack/error.hpp"
#include "rdstack/nn/ops.hpp"

namespace rdstack::models {

using nn::Shape;
using nn::Tensor;

ConvLstmState convlstm_cell_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                 const ConvLstmCellParams& p) {
  const int hidden = h_prev.shape().c;
  if (!(h_prev.shape() == c_prev.shape())) {
    fail(ErrorCategory::shape_mismatch, "convlstm: h " + h_prev.shape().str() + " vs c " + c_prev.shape().str());
  }
  if (p.weight.shape().n != 4 * hidden) {
    fail(ErrorCategory::shape_mismatch, "convlstm: weight " + p.weight.shape().str() + " for hidden " +
                                            std::to_string(hidden));
  }
  const Tensor joined = x.defined() ? nn::concat_channels({x, h_prev}) : h_prev;
  const Tensor gates = nn::conv2d(joined, p.weight, p.bias);

  const Tensor i = nn::sigmoid(nn::add(nn::slice_channels(gates, 0, hidden), nn::mul_channel(c_prev, p.peep_i)));
  const Tensor f =
      nn::sigmoid(nn::add(nn::slice_channels(gates, hidden, hidden), nn::mul_channel(c_prev, p.peep_f)));
  const Tensor g = nn::tanh(nn::slice_channels(gates, 2 * hidden, hidden));
  const Tensor c = nn::add(nn::mul(f, c_prev), nn::mul(i, g));
  const Tensor o = nn::sigmoid(nn::add(nn::slice_channels(gates, 3 * hidden, hidden), nn::mul_channel(c, p.peep_o)));
  return {nn::mul(o, nn::tanh(c)), c};
}

ConvLstmModel::ConvLstmModel(const ModelSpec& spec, std::uint64_t seed) : SequenceModel(spec) {
  if (spec_.family != Family::convlstm) fail(ErrorCategory::config, "ConvLstmModel needs family convlstm");
  std::mt19937_64 rng(seed);
  const int hid = spec_.hidden;
  const int k = spec_.kernel;
  auto make_cell = [&](const std::string& prefix, int in_c) {
    const Shape ws{4 * hid, in_c + hid, k, k};
    params_.create(prefix + ".weight", ws, nn::fan_in_bound((in_c + hid) * k * k), rng);
    params_.create_constant(prefix + ".bias", Shape{1, 4 * hid, 1, 1}, 0.0);
    params_.create(prefix + ".peep_i", Shape{1, hid, 1, 1}, 0.1, rng);
    params_.create(prefix + ".peep_f", Shape{1, hid, 1, 1}, 0.1, rng);
    params_.create(prefix + ".peep_o", Shape{1, hid, 1, 1}, 0.1, rng);
    return cell(prefix);
  };
  for (int l = 0; l < spec_.layers; ++l) {
    encoder_.push_back(make_cell("encoder." + std::to_string(l), l == 0 ? spec_.in_channels : hid));
  }
  for (int l = 0; l < spec_.layers; ++l) {
    decoder_.push_back(make_cell("decoder." + std::to_string(l), l == 0 ? 0 : hid));
  }
  head_weight_ = params_.create("head.weight", Shape{spec_.out_channels, 3 * hid, k, k},
                                nn::fan_in_bound(3 * hid * k * k), rng);
  head_bias_ = params_.create_constant("head.bias", Shape{1, spec_.out_channels, 1, 1}, 0.0);
}

ConvLstmCellParams ConvLstmModel::cell(const std::string& prefix) const {
  return {params_.get(prefix + ".weight"), params_.get(prefix + ".bias"), params_.get(prefix + ".peep_i"),
          params_.get(prefix + ".peep_f"), params_.get(prefix + ".peep_o")};
}

Tensor ConvLstmModel::forward_impl(const Tensor& x) const {
  const Shape s = x.shape();
  const int cin = spec_.in_channels;
  const Shape state_shape{s.n, spec_.hidden, s.h, s.w};

  std::vector<ConvLstmState> states(static_cast<std::size_t>(spec_.layers),
                                    ConvLstmState{Tensor::zeros(state_shape), Tensor::zeros(state_shape)});
  for (int t = 0; t < spec_.m; ++t) {
    Tensor input = nn::slice_channels(x, t * cin, cin);
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      states[l] = convlstm_cell_step(input, states[l].h, states[l].c, encoder_[l]);
      input = states[l].h;
    }
  }

  std::vector<Tensor> hiddens;
  for (int t = 0; t < spec_.n; ++t) {
    Tensor input;
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      states[l] = convlstm_cell_step(input, states[l].h, states[l].c, decoder_[l]);
      input = states[l].h;
    }
    hiddens.push_back(input);
  }

  const Tensor pad = Tensor::zeros(state_shape);
  std::vector<Tensor> frames;
  for (int t = 0; t < spec_.n; ++t) {
    const Tensor& prev = t > 0 ? hiddens[static_cast<std::size_t>(t - 1)] : pad;
    const Tensor& next = t + 1 < spec_.n ? hiddens[static_cast<std::size_t>(t + 1)] : pad;
    frames.push_back(nn::conv2d(nn::concat_channels({prev, hiddens[static_cast<std::size_t>(t)], next}),
                                head_weight_, head_bias_));
  }
  return nn::concat_channels(frames);
}

}  // namespace rdstack::models
