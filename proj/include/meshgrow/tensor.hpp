#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "meshgrow/errors.hpp"

namespace meshgrow::ad {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline uint64_t next_node_id() {
  static std::atomic<uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// One vertex of the computation graph. Nodes are created in topological
// order, so ids give a valid reverse traversal order for backprop.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until touched by backward
  bool requires_grad = false;
  const char* op = "leaf";
  uint64_t id = next_node_id();
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool backward_done = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T(0));
  }
};

// Value-semantics handle to a graph node. Copies share the node.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    auto node = std::make_shared<Node<T>>();
    node->values.assign(static_cast<size_t>(shape_numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor constant(Shape shape, std::vector<T> values) {
    if (static_cast<int64_t>(values.size()) != shape_numel(shape)) {
      throw ContractError("tensor: values length " +
                          std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    return Tensor(std::move(node));
  }

  static Tensor scalar(T v) { return constant({}, {v}); }

  static Tensor param(Shape shape, std::vector<T> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t dim(size_t axis) const { return node_->shape[axis]; }
  int64_t numel() const { return static_cast<int64_t>(node_->values.size()); }

  std::vector<T>& values() { return node_->values; }
  const std::vector<T>& values() const { return node_->values; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<T>& grad() {
    if (node_->grad.empty()) {
      throw ContractError("tensor: gradient not populated (op " +
                          std::string(node_->op) + ")");
    }
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  void zero_grad() { node_->grad.assign(node_->values.size(), T(0)); }

  T item() const {
    if (numel() != 1) {
      throw ContractError("tensor: item() on non-scalar shape " +
                          shape_str(node_->shape));
    }
    return node_->values[0];
  }

  // Constant copy of the current values, cut off from the graph.
  Tensor detached() const {
    return constant(node_->shape, node_->values);
  }

  std::shared_ptr<Node<T>>& node() { return node_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// requires_grad tensor reachable from it, in descending node-id order, which
// makes the accumulation deterministic. A second sweep from the same loss is
// an error; reset by rebuilding the graph.
template <typename T>
void backward(Tensor<T> loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  auto root = loss.node();
  if (root->backward_done) {
    throw ContractError("backward: called twice on the same loss");
  }
  if (!root->requires_grad) {
    root->backward_done = true;
    return;  // nothing trainable below the loss
  }

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  root->ensure_grad();
  root->grad[0] = T(1);
  for (Node<T>* n : order) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  root->backward_done = true;
}

}  // namespace meshgrow::ad
