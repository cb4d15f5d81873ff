// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtlf/error.hpp"

namespace mtlf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Thread-local switch consulted by every op; when disabled no graph is
// recorded regardless of requires_grad on the inputs.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard() noexcept;
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with reverse-mode autodiff.
///
/// A Tensor is a shared handle: copies alias the same storage and graph node.
/// Use clone() for an independent leaf. Leaves (parameters) accumulate
/// gradients across backward() calls until zero_grad(); interior nodes are
/// reset at the start of every backward pass.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  struct Node;
  using BackwardFn = std::function<void(Node&)>;

  struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;

    // Gradient buffer to accumulate into, allocated on first use. Empty span
    // when this node does not participate in differentiation.
    std::span<T> grad_sink() {
      if (!requires_grad) return {};
      if (grad.size() != data.size()) grad.assign(data.size(), T(0));
      return grad;
    }
  };

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    if (numel(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_string(shape));
    }
    check_finite(data, "tensor construction");
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  /// Builds the result of a differentiable op. The backward closure reads
  /// node.grad and accumulates into node.parents[i]->grad_sink(); parents are
  /// stored in the order given by `inputs`.
  static Tensor from_op(std::string_view op, Shape shape, std::vector<T> data,
                        std::initializer_list<Tensor> inputs, BackwardFn backward) {
    return from_op(op, std::move(shape), std::move(data),
                   std::span<const Tensor>(inputs.begin(), inputs.size()),
                   std::move(backward));
  }

  static Tensor from_op(std::string_view op, Shape shape, std::vector<T> data,
                        std::span<const Tensor> inputs, BackwardFn backward) {
    check_finite(data, op);
    Tensor out;
    out.node_ = std::make_shared<Node>();
    out.node_->shape = std::move(shape);
    out.node_->data = std::move(data);
    bool track = false;
    if (grad_enabled()) {
      for (const auto& in : inputs) track = track || in.requires_grad();
    }
    if (track) {
      out.node_->requires_grad = true;
      out.node_->parents.reserve(inputs.size());
      for (const auto& in : inputs) out.node_->parents.push_back(in.node_);
      out.node_->backward = std::move(backward);
    }
    return out;
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t dim(std::size_t axis) const { return node().shape.at(axis); }
  std::size_t size() const { return node().data.size(); }

  std::span<const T> data() const { return node().data; }
  // Direct write access for optimizers and tests; bypasses the graph.
  std::span<T> mutable_data() { return node().data; }
  T item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node().data[0];
  }
  T at(std::size_t flat_index) const { return node().data.at(flat_index); }

  bool requires_grad() const { return defined() && node_->requires_grad; }
  void set_requires_grad(bool value) { node().requires_grad = value; }
  bool is_leaf() const { return !node().backward; }

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const T> grad() const { return node().grad; }
  std::span<T> mutable_grad() { return node().grad_sink(); }
  void zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), T(0));
  }

  // Independent leaf copy of the values; no grad, no history.
  Tensor clone() const { return Tensor(shape(), node().data, requires_grad()); }

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  void backward() const;

  static void check_finite(std::span<const T> values, std::string_view where) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw NumericError("non-finite value at index " + std::to_string(i) + " in " +
                           std::string(where));
      }
    }
  }

 private:
  Node& node() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return *node_;
  }

  std::shared_ptr<Node> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
void zero_grads(std::span<NamedParameter<T>> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace mtlf
