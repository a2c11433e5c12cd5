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
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/tensor.hpp"

namespace trasr {

struct GradCheckResult {
  double max_error = 0.0;
  std::int64_t worst_input = -1;
  std::int64_t worst_index = -1;
};

/// Compares reverse-mode gradients against central differences for every
/// coordinate of every tensor in `inputs`. `f` must rebuild its graph from
/// the current input values on each call and return a scalar.
///
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|).
inline GradCheckResult grad_check(const std::function<Tensor64()>& f,
                                  std::vector<Tensor64> inputs, double eps = 1e-5) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  const Tensor64 out = f();
  if (out.numel() != 1) throw DimensionError("grad_check needs a scalar-valued function");
  if (!std::isfinite(out.item())) throw GradCheckError("non-finite function value", -1);
  out.backward();

  GradCheckResult result;
  std::int64_t flat = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& x = inputs[t];
    const std::vector<double> analytic =
        x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                     : std::vector<double>(static_cast<std::size_t>(x.numel()), 0.0);
    auto data = x.data_mut();
    for (std::int64_t i = 0; i < x.numel(); ++i, ++flat) {
      const double orig = data[i];
      double plus, minus;
      {
        NoGradGuard guard;
        data[i] = orig + eps;
        plus = f().item();
        data[i] = orig - eps;
        minus = f().item();
        data[i] = orig;
      }
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw GradCheckError("non-finite function value during differencing", flat);
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      if (!std::isfinite(a)) throw GradCheckError("non-finite analytic gradient", flat);
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > result.max_error) {
        result.max_error = err;
        result.worst_input = static_cast<std::int64_t>(t);
        result.worst_index = i;
      }
    }
  }
  return result;
}

/// Single-input form: f(x) scalar.
inline double grad_check(const std::function<Tensor64(const Tensor64&)>& f, Tensor64 x,
                         double eps = 1e-5) {
  return grad_check([&] { return f(x); }, {x}, eps).max_error;
}

}  // namespace trasr
