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

#include <cstdint>
#include <vector>

#include "trasr/core/error.hpp"

namespace trasr {

/// Frames x bins feature matrix. Rows at or beyond `length` are padding.
struct FeatureSequence {
  std::int64_t frames = 0;
  std::int64_t dim = 0;
  std::int64_t length = 0;
  std::vector<float> values;

  FeatureSequence() = default;
  FeatureSequence(std::int64_t frames_, std::int64_t dim_, std::vector<float> values_)
      : frames(frames_), dim(dim_), length(frames_), values(std::move(values_)) {
    if (static_cast<std::int64_t>(values.size()) != frames * dim) {
      throw DimensionError("feature matrix needs frames*dim values");
    }
  }

  float at(std::int64_t t, std::int64_t f) const { return values[static_cast<std::size_t>(t * dim + f)]; }
  float& at(std::int64_t t, std::int64_t f) { return values[static_cast<std::size_t>(t * dim + f)]; }
};

}  // namespace trasr
