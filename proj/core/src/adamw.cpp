// SPDX-License-Identifier: Apache-2.0
#include "mtlf/adamw.hpp"

#include <cmath>
#include <string>

namespace mtlf {

void AdamWConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and non-negative");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

template <typename T>
AdamW<T>::AdamW(std::vector<NamedParameter<T>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  first_.reserve(params_.size());
  second_.reserve(params_.size());
  for (const auto& p : params_) {
    first_.emplace_back(p.tensor.size(), T(0));
    second_.emplace_back(p.tensor.size(), T(0));
  }
}

template <typename T>
void AdamW<T>::set_learning_rate(double lr) {
  AdamWConfig next = config_;
  next.learning_rate = lr;
  next.validate();
  config_ = next;
}

template <typename T>
void AdamW<T>::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw OptimizerError("parameter '" + p.name + "' has no gradient");
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const T lr = static_cast<T>(config_.learning_rate);
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T eps = static_cast<T>(config_.epsilon);
  const T decay = static_cast<T>(config_.learning_rate * config_.weight_decay);
  const T correction1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].tensor.mutable_data();
    auto g = params_[i].tensor.grad();
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= decay * w[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    Tensor<T>::check_finite(w, "adamw update of '" + params_[i].name + "'");
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) {
    p.tensor.mutable_grad();
    p.tensor.zero_grad();
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace mtlf
