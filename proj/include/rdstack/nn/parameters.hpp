#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rdstack/nn/tensor.hpp"

namespace rdstack::nn {

/// Ordered, named collection of trainable leaves. Insertion order is the
/// serialization order.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  /// Uniform(-bound, bound) initialization.
  Tensor create(const std::string& name, Shape shape, double bound, std::mt19937_64& rng);
  Tensor create_constant(const std::string& name, Shape shape, double value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Copies values from another store with identical names and shapes.
  void copy_values_from(const ParameterStore& other);
  /// Hash over names, shapes and raw values.
  std::string hash() const;

 private:
  std::vector<Entry> entries_;
};

/// He-style fan-in bound for a convolution weight.
double fan_in_bound(int fan_in);

}  // namespace rdstack::nn
