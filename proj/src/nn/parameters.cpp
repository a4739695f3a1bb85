#include "rdstack/nn/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "rdstack/error.hpp"
#include "rdstack/hash.hpp"

namespace rdstack::nn {

Tensor ParameterStore::create(const std::string& name, Shape shape, double bound, std::mt19937_64& rng) {
  if (contains(name)) fail(ErrorCategory::invalid_argument, "duplicate parameter " + name);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape.numel());
  for (double& v : values) v = dist(rng);
  Tensor t = Tensor::from(shape, std::move(values), true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParameterStore::create_constant(const std::string& name, Shape shape, double value) {
  if (contains(name)) fail(ErrorCategory::invalid_argument, "duplicate parameter " + name);
  Tensor t = Tensor::full(shape, value, true);
  entries_.push_back({name, t});
  return t;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  fail(ErrorCategory::invalid_argument, "unknown parameter " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) out.push_back(e.tensor);
  return out;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.entries_.size() != entries_.size()) {
    fail(ErrorCategory::shape_mismatch, "parameter stores differ in size");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& src = other.entries_[i];
    Entry& dst = entries_[i];
    if (src.name != dst.name || !(src.tensor.shape() == dst.tensor.shape())) {
      fail(ErrorCategory::shape_mismatch, "parameter " + dst.name + " does not match " + src.name);
    }
    std::ranges::copy(src.tensor.data(), dst.tensor.mutable_data().begin());
  }
}

std::string ParameterStore::hash() const {
  Fnv1a h;
  for (const Entry& e : entries_) {
    h.update(e.name);
    h.update(e.tensor.shape().str());
    h.update(e.tensor.data());
  }
  return h.hex();
}

double fan_in_bound(int fan_in) { return std::sqrt(1.0 / std::max(fan_in, 1)); }

}  // namespace rdstack::nn
