// SPDX-License-Identifier: Apache-2.0
#include "mtlf/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace mtlf {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() noexcept : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
void Tensor<T>::backward() const {
  auto& root = node();
  if (root.data.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Leaves collect this pass into a fresh buffer that is added to their
  // previous gradient once at the end, so accumulation across passes does
  // not depend on how many terms each op contributes.
  std::vector<std::pair<Node*, std::vector<T>>> accumulated;
  for (Node* n : order) {
    if (n->backward) {
      n->grad.assign(n->data.size(), T(0));
    } else if (!n->grad.empty()) {
      accumulated.emplace_back(n, std::move(n->grad));
      n->grad.clear();
    }
  }
  root.grad_sink()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  for (auto& [n, previous] : accumulated) {
    auto fresh = n->grad_sink();
    for (std::size_t i = 0; i < previous.size(); ++i) previous[i] += fresh[i];
    n->grad = std::move(previous);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mtlf
