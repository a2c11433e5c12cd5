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
#include <numeric>
#include <vector>

#include "trasr/core/rng.hpp"
#include "trasr/core/tensor.hpp"
#include "trasr/data/vocab.hpp"
#include "trasr/frontend/feature_sequence.hpp"

namespace trasr {

/// Groups utterance indices into batches. With `sort_by_length` indices are
/// ordered by (length, index) and chunked so that neighbours share a batch.
/// The batch order is shuffled from `seed` unless `shuffle` is false.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::int64_t>& lengths,
                                                          std::int64_t batch_size, bool sort_by_length,
                                                          std::uint64_t seed, bool shuffle = true) {
  if (lengths.empty()) throw Error("cannot batch an empty manifest");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (sort_by_length) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (shuffle) {
    Rng rng = Rng(seed).derive("batches");
    for (std::size_t i = batches.size(); i > 1; --i) {
      std::swap(batches[i - 1], batches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
  }
  return batches;
}

/// Padded model inputs for one batch.
template <typename S>
struct Batch {
  std::vector<std::size_t> indices;
  BasicTensor<S> features;                    // [B, T_max, F], zero padded
  std::vector<std::int64_t> feature_lengths;  // true frames
  std::vector<std::vector<std::int64_t>> targets;
  std::int64_t max_target = 0;  // U_max; decoder sequences have U_max + 1 steps
  std::vector<std::int64_t> decoder_input;   // [B, U_max+1]: sos, y, pad...
  std::vector<std::int64_t> decoder_output;  // [B, U_max+1]: y, eos, pad...
  std::vector<std::int64_t> decoder_lengths; // |y| + 1
  std::vector<std::uint8_t> decoder_keep;    // [B * (U_max+1)]

  std::int64_t size() const { return static_cast<std::int64_t>(indices.size()); }
  std::int64_t decoder_steps() const { return max_target + 1; }
  std::int64_t token_count() const {
    std::int64_t n = 0;
    for (const auto& t : targets) n += static_cast<std::int64_t>(t.size());
    return n;
  }
};

template <typename S>
Batch<S> assemble_batch(const std::vector<std::size_t>& indices, const std::vector<FeatureSequence>& features,
                        const std::vector<std::vector<std::int64_t>>& targets) {
  if (indices.empty()) throw Error("empty batch");
  Batch<S> b;
  b.indices = indices;
  const std::int64_t F = features[indices[0]].dim;
  std::int64_t T = 0;
  for (auto i : indices) {
    if (features[i].dim != F) throw DimensionError("feature dimension differs within a batch");
    T = std::max(T, features[i].length);
    b.max_target = std::max<std::int64_t>(b.max_target, static_cast<std::int64_t>(targets[i].size()));
  }
  const auto B = static_cast<std::int64_t>(indices.size());
  std::vector<S> x(static_cast<std::size_t>(B * T * F), S(0));
  const std::int64_t U = b.max_target + 1;
  b.decoder_input.assign(static_cast<std::size_t>(B * U), Vocabulary::kPad);
  b.decoder_output.assign(static_cast<std::size_t>(B * U), Vocabulary::kPad);
  b.decoder_keep.assign(static_cast<std::size_t>(B * U), 0);
  for (std::int64_t r = 0; r < B; ++r) {
    const auto& fs = features[indices[static_cast<std::size_t>(r)]];
    for (std::int64_t t = 0; t < fs.length; ++t) {
      for (std::int64_t f = 0; f < F; ++f) x[static_cast<std::size_t>((r * T + t) * F + f)] = static_cast<S>(fs.at(t, f));
    }
    b.feature_lengths.push_back(fs.length);
    const auto& y = targets[indices[static_cast<std::size_t>(r)]];
    b.targets.push_back(y);
    const auto n = static_cast<std::int64_t>(y.size());
    auto at = [&](std::int64_t u) { return static_cast<std::size_t>(r * U + u); };
    b.decoder_input[at(0)] = Vocabulary::kSos;
    for (std::int64_t u = 0; u < n; ++u) {
      b.decoder_input[at(u + 1)] = y[static_cast<std::size_t>(u)];
      b.decoder_output[at(u)] = y[static_cast<std::size_t>(u)];
    }
    b.decoder_output[at(n)] = Vocabulary::kEos;
    for (std::int64_t u = 0; u <= n; ++u) b.decoder_keep[at(u)] = 1;
    b.decoder_lengths.push_back(n + 1);
  }
  b.features = BasicTensor<S>::from_data({B, T, F}, std::move(x));
  return b;
}

}  // namespace trasr
