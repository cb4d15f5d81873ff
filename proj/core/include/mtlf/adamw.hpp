// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mtlf/tensor.hpp"

namespace mtlf {

struct AdamWConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

/// Adam with decoupled weight decay. Each step first shrinks every parameter
/// by lr * weight_decay * p, then applies the bias-corrected Adam update:
///
///   m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<NamedParameter<T>> params, AdamWConfig config);

  /// Throws OptimizerError naming the first parameter without a gradient.
  void step();
  /// Leaves every parameter with an all-zero gradient, so parameters that a
  /// batch does not reach (other task heads) still take a g = 0 step.
  void zero_grad();

  const AdamWConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr);
  std::uint64_t step_count() const noexcept { return step_count_; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::vector<NamedParameter<T>>& parameters() noexcept { return params_; }
  const std::vector<T>& first_moment(std::size_t i) const { return first_.at(i); }
  const std::vector<T>& second_moment(std::size_t i) const { return second_.at(i); }

 private:
  std::vector<NamedParameter<T>> params_;
  AdamWConfig config_;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  std::uint64_t step_count_ = 0;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace mtlf
