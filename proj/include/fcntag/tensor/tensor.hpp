#pragma once

// Dense row-major n-d array with reverse-mode differentiation.
//
// Every op that consumes a tensor with requires_grad attaches a Node to its
// result. backward() orders the reachable nodes into a ComputationTape
// (producers before consumers) and runs it in reverse, summing gradient
// contributions from all consumers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fcntag/error.hpp"

namespace fcntag {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
class Tensor;

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::string op;
  std::vector<Tensor<T>> inputs;
  // Reads out.grad and accumulates into the inputs that require grad.
  std::function<void(TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;

  std::vector<T>& grad_buffer() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from(shape, std::vector<T>(fcntag::numel(shape), T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    return from(shape, std::vector<T>(fcntag::numel(shape), value), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    for (auto d : shape)
      if (d == 0) throw Error(ErrorKind::shape, "tensor dimensions must be positive, got " + shape_str(shape));
    if (fcntag::numel(shape) != values.size())
      throw Error(ErrorKind::shape, "shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                                        " values");
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->values.size(); }

  std::span<T> values() { return impl_->values; }
  std::span<const T> values() const { return impl_->values; }
  T item() const {
    if (numel() != 1) throw Error(ErrorKind::contract, "item() on tensor of shape " + shape_str(shape()));
    return impl_->values[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return impl_->grad.size() == impl_->values.size(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> grad_mut() { return impl_->grad_buffer(); }
  void zero_grad() { impl_->grad.clear(); }

  const std::shared_ptr<Node<T>>& grad_fn() const { return impl_->grad_fn; }
  /// Cuts the history so the tensor becomes a leaf.
  void detach() { impl_->grad_fn.reset(); }

  TensorImpl<T>* impl() const { return impl_.get(); }

  /// Deep copy of the values only (no grad, no history).
  Tensor clone(bool requires_grad = false) const { return from(shape(), impl_->values, requires_grad); }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

/// Builds the result of an op. A Node is attached only when some input
/// requires grad.
namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_mode_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::string op, std::vector<Tensor<T>> inputs,
                      std::function<void(TensorImpl<T>&)> backward) {
  bool needs = grad_mode_enabled() && std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
  auto out = Tensor<T>::from(std::move(shape), std::move(values), needs);
  if (needs) {
    auto node = std::make_shared<Node<T>>();
    node->op = std::move(op);
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl()->grad_fn = std::move(node);
  }
  return out;
}

/// Executed operations reachable from a root, producers first.
template <typename T>
class ComputationTape {
 public:
  static ComputationTape record(const Tensor<T>& root) {
    ComputationTape tape;
    if (!root.defined() || !root.grad_fn()) return tape;
    std::unordered_set<const TensorImpl<T>*> seen;
    // Iterative post-order DFS: (impl, next input index).
    std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
    stack.emplace_back(root.impl(), 0);
    seen.insert(root.impl());
    while (!stack.empty()) {
      auto& [impl, next] = stack.back();
      const auto& inputs = impl->grad_fn->inputs;
      if (next < inputs.size()) {
        TensorImpl<T>* child = inputs[next++].impl();
        if (child->grad_fn && seen.insert(child).second) stack.emplace_back(child, 0);
        continue;
      }
      tape.entries_.push_back(impl);
      stack.pop_back();
    }
    return tape;
  }

  const std::vector<TensorImpl<T>*>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// True if every entry appears after the producers of all its inputs.
  bool is_topological() const {
    std::unordered_set<const TensorImpl<T>*> done;
    for (auto* impl : entries_) {
      for (const auto& in : impl->grad_fn->inputs)
        if (in.impl()->grad_fn && !done.count(in.impl())) return false;
      done.insert(impl);
    }
    return true;
  }

 private:
  std::vector<TensorImpl<T>*> entries_;
};

/// Populates .grad of every requires_grad tensor reachable from `loss` with
/// d(loss)/d(tensor). Existing leaf gradients are accumulated into.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw Error(ErrorKind::contract, "backward() needs a scalar loss, got shape " +
                                         (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  auto tape = ComputationTape<T>::record(loss);
  if (tape.empty()) throw Error(ErrorKind::contract, "backward() on a tensor with no recorded operations");
  loss.impl()->grad_buffer()[0] += T(1);
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    TensorImpl<T>& impl = **it;
    if (impl.grad.empty()) continue;  // no gradient flowed here
    impl.grad_fn->backward(impl);
  }
}

}  // namespace fcntag
