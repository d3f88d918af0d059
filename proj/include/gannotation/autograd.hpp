#pragma once

// Tape-free reverse-mode differentiation. Every op result owns shared
// references to its inputs; backward() walks the resulting DAG in reverse
// topological order.

#include "gannotation/tensor.hpp"

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

namespace gannotation {

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph construction in the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  T item() const { return node_->value.item(); }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; zeros when none has been propagated.
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  const NodePtr& node() const { return node_; }

  /// Backpropagates from a scalar.
  void backward() const {
    if (value().size() != 1) throw std::invalid_argument("backward() requires a scalar output");
    if (!node_->requires_grad) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node<T>* child = node->inputs[next++].get();
        if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    node_->grad_buffer().array() += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* node = *it;
      if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    // Intermediate grads are only needed during the sweep.
    for (Node<T>* node : order) {
      if (node->backward) node->grad = Tensor<T>();
    }
  }

 private:
  NodePtr node_;
};

template <typename T>
Var<T> detach(const Var<T>& v) {
  return Var<T>(v.value(), false);
}

template <typename T>
Var<T> constant(Tensor<T> v) {
  return Var<T>(std::move(v), false);
}

namespace detail {

/// Wraps an op result, attaching a backward closure only when some input needs it.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    for (auto& in : inputs) node->inputs.push_back(in.node());
  }
  return Var<T>(std::move(node));
}

template <typename T>
Tensor<T>* grad_of(Node<T>& self, std::size_t i) {
  auto& in = self.inputs[i];
  return in->requires_grad ? &in->grad_buffer() : nullptr;
}

}  // namespace detail

}  // namespace gannotation
