#pragma once

#include <vector>

#include "rdstack/nn/tensor.hpp"

namespace rdstack::nn {

struct AdamOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> parameters, AdamOptions options = {});

  /// One bias-corrected update from the current gradients. Parameters
  /// without a gradient are skipped but still count toward the step.
  void step();
  void zero_grad();
  long steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace rdstack::nn
