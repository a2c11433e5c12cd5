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

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/rng.hpp"
#include "trasr/core/tensor.hpp"

namespace trasr {

/// Named model parameters in lexicographic order.
template <typename S>
class ParameterStore {
 public:
  using TensorType = BasicTensor<S>;

  // Adds a parameter; trainable stores mark every entry grad-tracked.
  TensorType& add(const std::string& name, TensorType t) {
    if (entries_.count(name)) throw Error("duplicate parameter name '" + name + "'");
    t.set_requires_grad(trainable_);
    return entries_.emplace(name, std::move(t)).first->second;
  }

  const TensorType& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("no parameter named '" + name + "'");
    return it->second;
  }
  TensorType& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("no parameter named '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : entries_) n += v.numel();
    return n;
  }

  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t s) { step_count_ = s; }

  bool trainable() const { return trainable_; }

  void zero_grad() {
    for (auto& [k, v] : entries_) v.zero_grad();
  }

  /// Independent copy of all values. A frozen copy tracks no gradients.
  ParameterStore deep_copy(bool trainable = true) const {
    ParameterStore out;
    out.trainable_ = trainable;
    out.step_count_ = step_count_;
    for (const auto& [k, v] : entries_) out.add(k, v.detach());
    return out;
  }

  template <typename To>
  ParameterStore<To> cast_to(bool trainable = true) const {
    ParameterStore<To> out(trainable);
    for (const auto& [k, v] : entries_) out.add(k, cast<To>(v));
    out.set_step_count(step_count_);
    return out;
  }

  explicit ParameterStore(bool trainable = true) : trainable_(trainable) {}

 private:
  std::map<std::string, TensorType> entries_;
  std::uint64_t step_count_ = 0;
  bool trainable_ = true;
};

enum class InitKind { kXavierUniform, kZeros, kOnes };

/// Uniform in +-sqrt(6 / (fan_in + fan_out)). For rank > 2 the trailing axes
/// are receptive field and multiply both fans.
template <typename S>
BasicTensor<S> xavier_uniform(const Shape& shape, Rng rng) {
  std::int64_t fan_in = 1, fan_out = 1;
  if (shape.size() == 2) {
    fan_in = shape[0];
    fan_out = shape[1];
  } else if (shape.size() > 2) {
    std::int64_t rf = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) rf *= shape[i];
    // conv kernels are [out, in, kh, kw]
    fan_in = shape[1] * rf;
    fan_out = shape[0] * rf;
  } else if (shape.size() == 1) {
    fan_in = fan_out = shape[0];
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<S> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = static_cast<S>(rng.uniform(-bound, bound));
  return BasicTensor<S>::from_data(shape, std::move(v));
}

template <typename S>
BasicTensor<S> init_parameter(const Shape& shape, InitKind kind, const Rng& root,
                              const std::string& name) {
  switch (kind) {
    case InitKind::kZeros:
      return BasicTensor<S>::zeros(shape);
    case InitKind::kOnes:
      return BasicTensor<S>::full(shape, S{1});
    case InitKind::kXavierUniform:
    default:
      return xavier_uniform<S>(shape, root.derive("init/" + name));
  }
}

}  // namespace trasr
