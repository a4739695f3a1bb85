#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rdstack/nn/parameters.hpp"
#include "rdstack/nn/tensor.hpp"

namespace rdstack::models {

enum class Family { convlstm, ufno, tau };

std::string_view family_name(Family family) noexcept;
Family family_from_name(std::string_view name);

/// Direction of the inter-frame divergence term in the TAU loss.
enum class KlDirection { true_to_pred, pred_to_true };

struct ModelSpec {
  Family family = Family::convlstm;
  int m = 5;
  int n = 5;
  int in_channels = 7;
  int out_channels = 4;

  /// ConvLSTM hidden channels, U-FNO width, TAU per-frame encoder channels.
  int hidden = 16;
  int kernel = 3;
  /// ConvLSTM: stacked cells in the encoder and in the decoder.
  int layers = 1;

  int modes = 8;
  int fourier_layers = 2;
  int ufourier_layers = 2;

  int tau_blocks = 4;
  double tau_alpha = 0.1;
  KlDirection kl_direction = KlDirection::true_to_pred;

  /// Correction form: frame k of the output is sigmoid(logit(input frame k) +
  /// network logits), with a zero-initialized output layer so an untrained
  /// network passes its input through. Needs m == n and in == out channels.
  bool residual = false;

  /// Desk-scale defaults for a family.
  static ModelSpec defaults(Family family);

  void validate() const;
  /// Rejects grids the architecture cannot process.
  void validate_grid(int height, int width) const;

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Sequence-to-sequence surrogate: [B, m * in_channels, H, W] ->
/// [B, n * out_channels, H, W] with values in [0, 1]. Frame k of a sequence
/// occupies channels [k * C, (k + 1) * C).
class SequenceModel {
 public:
  explicit SequenceModel(ModelSpec spec);
  virtual ~SequenceModel() = default;
  SequenceModel(const SequenceModel&) = delete;
  SequenceModel& operator=(const SequenceModel&) = delete;

  nn::Tensor forward(const nn::Tensor& x) const;

  const ModelSpec& spec() const noexcept { return spec_; }
  nn::ParameterStore& parameters() noexcept { return params_; }
  const nn::ParameterStore& parameters() const noexcept { return params_; }

  /// Fixed per-channel affine map applied to every input frame before the
  /// network (empty: identity). Correction levels use it to standardize
  /// predicted fields.
  void set_input_affine(std::vector<double> scale, std::vector<double> offset);
  const std::vector<double>& input_scale() const noexcept { return input_scale_; }
  const std::vector<double>& input_offset() const noexcept { return input_offset_; }

  /// Number of forward() calls since construction.
  long forward_count() const noexcept { return forwards_.load(); }

 protected:
  /// Pre-sigmoid output logits.
  virtual nn::Tensor forward_impl(const nn::Tensor& x) const = 0;
  /// Parameters of the layer that produces the logits.
  virtual std::vector<std::string> output_layer() const = 0;

  friend std::unique_ptr<SequenceModel> make_model(const ModelSpec& spec, std::uint64_t seed);

  ModelSpec spec_;
  nn::ParameterStore params_;

 private:
  std::vector<double> input_scale_;
  std::vector<double> input_offset_;
  mutable std::atomic<long> forwards_{0};
};

std::unique_ptr<SequenceModel> make_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace rdstack::models
