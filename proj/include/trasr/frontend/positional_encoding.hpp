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
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/ops.hpp"

namespace trasr {

/// Row-major [n, d] sinusoid table: sin on even columns, cos on odd.
template <typename S>
std::vector<S> sinusoid_table(std::int64_t n, std::int64_t d) {
  if (d % 2 != 0) throw DimensionError("positional encoding needs an even width, got " + std::to_string(d));
  std::vector<S> pe(static_cast<std::size_t>(n * d));
  for (std::int64_t i = 0; i < d / 2; ++i) {
    const double inv = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
    for (std::int64_t t = 0; t < n; ++t) {
      const double a = static_cast<double>(t) * inv;
      pe[t * d + 2 * i] = static_cast<S>(std::sin(a));
      pe[t * d + 2 * i + 1] = static_cast<S>(std::cos(a));
    }
  }
  return pe;
}

/// Adds the table to x [..., n, d], broadcasting over leading axes.
template <typename S>
BasicTensor<S> add_positional_encoding(const BasicTensor<S>& x) {
  const std::int64_t n = x.dim(-2), d = x.dim(-1);
  return add(x, BasicTensor<S>::from_data({n, d}, sinusoid_table<S>(n, d)));
}

}  // namespace trasr
