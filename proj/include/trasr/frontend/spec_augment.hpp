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
#include <cstdint>

#include "trasr/core/rng.hpp"
#include "trasr/frontend/feature_sequence.hpp"

namespace trasr {

struct SpecAugmentConfig {
  int n_freq_masks = 2;
  std::int64_t max_freq_width = 10;
  int n_time_masks = 2;
  std::int64_t max_time_width = 20;
};

/// Zeroes random frequency and time bands inside the true length. No time
/// warping.
inline FeatureSequence spec_augment(FeatureSequence x, const SpecAugmentConfig& cfg, Rng& rng) {
  const std::int64_t F = x.dim, T = x.length;
  if (F <= 0 || T <= 0) return x;
  for (int m = 0; m < cfg.n_freq_masks; ++m) {
    const std::int64_t w = std::min<std::int64_t>(rng.uniform_int(0, std::max<std::int64_t>(cfg.max_freq_width, 0)), F);
    const std::int64_t f0 = rng.uniform_int(0, F - w);
    for (std::int64_t t = 0; t < T; ++t) {
      for (std::int64_t f = f0; f < f0 + w; ++f) x.at(t, f) = 0.0f;
    }
  }
  for (int m = 0; m < cfg.n_time_masks; ++m) {
    const std::int64_t w = std::min<std::int64_t>(rng.uniform_int(0, std::max<std::int64_t>(cfg.max_time_width, 0)), T);
    const std::int64_t t0 = rng.uniform_int(0, T - w);
    for (std::int64_t t = t0; t < t0 + w; ++t) {
      for (std::int64_t f = 0; f < F; ++f) x.at(t, f) = 0.0f;
    }
  }
  return x;
}

}  // namespace trasr
