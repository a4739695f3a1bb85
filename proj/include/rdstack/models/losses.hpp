#pragma once

#include "rdstack/models/model.hpp"
#include "rdstack/nn/tensor.hpp"

namespace rdstack::models {

/// Per sample: sum of squared errors plus alpha times the KL divergence
/// between softmax distributions of the flattened inter-frame differences
/// (frame k+1 - frame k over all channels and pixels), summed over the n - 1
/// differences. Averaged over the batch. Tensors are [B, n * C, H, W].
nn::Tensor tau_loss(const nn::Tensor& pred, const nn::Tensor& target, int n, double alpha,
                    KlDirection direction = KlDirection::true_to_pred);

/// Training loss of a family: tau_loss for TAU, mean squared error otherwise.
nn::Tensor family_loss(const ModelSpec& spec, const nn::Tensor& pred, const nn::Tensor& target);

}  // namespace rdstack::models
