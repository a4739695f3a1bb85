#pragma once

#include <cstdint>
#include <vector>

#include "rdstack/models/model.hpp"

namespace rdstack::models {

/// Parameters of one ConvLSTM cell. `weight` convolves concat(x, h_prev)
/// into the four gate pre-activations (input, forget, candidate, output),
/// hidden channels each. Peepholes act per channel on the cell state.
struct ConvLstmCellParams {
  nn::Tensor weight;  // [4 * hidden, in + hidden, k, k]
  nn::Tensor bias;    // [1, 4 * hidden, 1, 1]
  nn::Tensor peep_i;  // [1, hidden, 1, 1]
  nn::Tensor peep_f;
  nn::Tensor peep_o;
};

struct ConvLstmState {
  nn::Tensor h;
  nn::Tensor c;
};

/// One cell update. `x` may be undefined for a cell without external input,
/// in which case `weight` covers only the hidden channels.
ConvLstmState convlstm_cell_step(const nn::Tensor& x, const nn::Tensor& h_prev, const nn::Tensor& c_prev,
                                 const ConvLstmCellParams& params);

/// Encoder-decoder of ConvLSTM cells. The encoder consumes the m input
/// frames; its final states seed the decoder, which unrolls n steps from its
/// own hidden state. A 3 x k x k convolution over the decoder hiddens (time
/// zero-padded) yields the output frames.
class ConvLstmModel final : public SequenceModel {
 public:
  ConvLstmModel(const ModelSpec& spec, std::uint64_t seed);

 protected:
  nn::Tensor forward_impl(const nn::Tensor& x) const override;
  std::vector<std::string> output_layer() const override { return {"head.weight", "head.bias"}; }

 private:
  ConvLstmCellParams cell(const std::string& prefix) const;

  std::vector<ConvLstmCellParams> encoder_;
  std::vector<ConvLstmCellParams> decoder_;
  nn::Tensor head_weight_;
  nn::Tensor head_bias_;
};

}  // namespace rdstack::models
