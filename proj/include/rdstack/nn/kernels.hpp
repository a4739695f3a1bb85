#pragma once

#include <span>
#include <vector>

namespace rdstack::nn::kernels {

/// Geometry of a grouped, strided, dilated 2-D convolution with zero padding.
/// Weights are [out_c][in_c / groups][k_h][k_w].
struct ConvGeometry {
  int batch = 1;
  int in_c = 1;
  int in_h = 1;
  int in_w = 1;
  int out_c = 1;
  int k_h = 1;
  int k_w = 1;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;
  int dilation = 1;
  int groups = 1;

  int out_h() const noexcept { return (in_h + 2 * pad_h - dilation * (k_h - 1) - 1) / stride + 1; }
  int out_w() const noexcept { return (in_w + 2 * pad_w - dilation * (k_w - 1) - 1) / stride + 1; }
  std::size_t input_size() const noexcept;
  std::size_t output_size() const noexcept;
  std::size_t weight_size() const noexcept;
  void validate() const;
};

/// Retained frequencies of a truncated real 2-D spectrum. Rows keep signed
/// frequencies -(modes_h-1) .. modes_h-1, columns keep 0 .. modes_w-1. When a
/// signed row frequency aliases an earlier one (only possible at the Nyquist
/// row of a full spectrum) its weight slot is unused.
struct SpectralGeometry {
  int batch = 1;
  int in_c = 1;
  int out_c = 1;
  int h = 1;
  int w = 1;
  int modes_h = 1;
  int modes_w = 1;

  int weight_rows() const noexcept { return 2 * modes_h - 1; }
  std::size_t weight_size() const noexcept;
  void validate() const;
};

// OpenMP-parallel kernels. Each parallel loop writes disjoint output slices
// and keeps a fixed per-element accumulation order, so results do not depend
// on the thread count. Backward kernels accumulate into their outputs.

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);

/// y = irfft2(W . rfft2(x)) restricted to the retained modes; weights are
/// complex [in_c][out_c][weight_rows][modes_w] split into real and imaginary parts.
void spectral_forward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                      std::span<const double> weight_im, std::span<double> output);
void spectral_backward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                       std::span<const double> weight_im, std::span<const double> grad_output,
                       std::span<double> grad_input, std::span<double> grad_weight_re,
                       std::span<double> grad_weight_im);

namespace reference {

// Serial, direct-summation versions of the kernels above. Kept for tests and
// the kernel benchmark; not used by the models.

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight,
                            std::span<double> grad_bias);
void spectral_forward(const SpectralGeometry& g, std::span<const double> input, std::span<const double> weight_re,
                      std::span<const double> weight_im, std::span<double> output);

}  // namespace reference

}  // namespace rdstack::nn::kernels
