// Copyright 2026 The trasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "trasr/core/error.hpp"

namespace trasr {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {
inline thread_local bool grad_mode_enabled = true;
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_enabled; }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_enabled) { detail::grad_mode_enabled = false; }
  ~NoGradGuard() { detail::grad_mode_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward;
};

// Returns the gradient buffer of `node`, allocating zeros on first use.
template <typename S>
std::vector<S>& grad_buffer(TensorNode<S>& node) {
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), S{0});
  node.has_grad = true;
  return node.grad;
}

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// A tensor is a shared handle: copies alias the same storage and graph node.
/// Values produced by an op are immutable; only leaves (parameters, inputs)
/// are mutated in place, and only outside of a live graph.
template <typename S>
class BasicTensor {
 public:
  using Scalar = S;
  using Node = TensorNode<S>;

  BasicTensor() = default;
  explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static BasicTensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false) {
    for (auto d : shape) {
      if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
      throw DimensionError("shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(data.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
  }
  static BasicTensor full(Shape shape, S v, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<S>(static_cast<std::size_t>(n), v),
                     requires_grad);
  }
  static BasicTensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), S{0}, requires_grad);
  }
  static BasicTensor scalar(S v, bool requires_grad = false) {
    return from_data({}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(node_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
  std::int64_t dim(std::int64_t axis) const {
    const auto r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_str(shape()));
    }
    return node_->shape[static_cast<std::size_t>(axis)];
  }

  std::span<const S> data() const { return node_->value; }
  std::span<S> data_mut() { return node_->value; }
  const std::vector<S>& values() const { return node_->value; }

  S item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  S at(std::initializer_list<std::int64_t> index) const {
    if (static_cast<std::int64_t>(index.size()) != rank()) {
      throw DimensionError("index rank mismatch for shape " + shape_str(shape()));
    }
    std::int64_t flat = 0;
    std::size_t i = 0;
    for (auto v : index) {
      const auto d = node_->shape[i++];
      if (v < 0 || v >= d) throw DimensionError("index out of range for " + shape_str(shape()));
      flat = flat * d + v;
    }
    return node_->value[static_cast<std::size_t>(flat)];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->has_grad; }
  std::span<const S> grad() const { return node_->grad; }
  std::span<S> grad_mut() { return grad_buffer(*node_); }
  void zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), S{0});
    node_->has_grad = false;
  }

  // Copy of the values with no graph attached.
  BasicTensor detach() const { return from_data(shape(), node_->value, false); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  /// Reverse sweep from this scalar; gradients accumulate into leaves.
  void backward() const {
    if (numel() != 1) {
      throw DimensionError("backward() needs a scalar, got shape " + shape_str(shape()));
    }
    if (!node_->requires_grad) throw Error("backward() on a tensor that does not require grad");

    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->inputs.size()) {
        Node* child = n->inputs[next++].get();
        if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    grad_buffer(*node_)[0] += S{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      if (!n->backward || !n->has_grad) continue;
      n->backward(*n);
      // Interior gradients are consumed once; drop them so a second sweep
      // over the same graph cannot double count.
      n->grad.clear();
      n->grad.shrink_to_fit();
      n->has_grad = false;
    }
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Builds an op output, attaching the graph only when some input is tracked.
template <typename S>
BasicTensor<S> make_result(Shape shape, std::vector<S> value,
                           std::vector<std::shared_ptr<TensorNode<S>>> inputs,
                           std::function<void(TensorNode<S>&)> backward) {
  auto node = std::make_shared<TensorNode<S>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool track = grad_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const auto& in) { return in->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return BasicTensor<S>(std::move(node));
}

template <typename S>
void check_finite(const BasicTensor<S>& t, const std::string& what) {
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

// Converts between scalar precisions; the result is a fresh leaf.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& t, bool requires_grad = false) {
  std::vector<To> v(t.data().begin(), t.data().end());
  return BasicTensor<To>::from_data(t.shape(), std::move(v), requires_grad);
}

/// Boolean keep-mask, broadcast against the tensor it masks.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;

  static Mask all(Shape shape) {
    const auto n = shape_numel(shape);
    return {std::move(shape), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1)};
  }
};

}  // namespace trasr
