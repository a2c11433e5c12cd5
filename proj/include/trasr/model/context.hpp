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
#include <string>
#include <string_view>
#include <vector>

#include "trasr/core/ops.hpp"
#include "trasr/core/params.hpp"
#include "trasr/core/rng.hpp"

namespace trasr {

/// One attention invocation as seen by the op counter.
struct AttentionCallRecord {
  std::string label;
  std::int64_t query_length = 0;
  std::int64_t key_length = 0;
  std::int64_t score_macs = 0;         // Q K^T
  std::int64_t weighted_sum_macs = 0;  // softmax(.) V
  std::int64_t total() const { return score_macs + weighted_sum_macs; }
  bool operator==(const AttentionCallRecord&) const = default;
};

/// Per-invocation multiply-add tally for attention.
class MacCounter {
 public:
  void set_label(std::string label) { label_ = std::move(label); }
  const std::string& label() const { return label_; }

  // One sequence attending with total head width `d` (heads folded in).
  void record(std::int64_t n_q, std::int64_t n_k, std::int64_t d) {
    calls_.push_back({label_, n_q, n_k, n_q * n_k * d, n_q * n_k * d});
  }
  void add(AttentionCallRecord r) { calls_.push_back(std::move(r)); }

  const std::vector<AttentionCallRecord>& calls() const { return calls_; }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& c : calls_) t += c.total();
    return t;
  }
  void clear() { calls_.clear(); }

 private:
  std::string label_;
  std::vector<AttentionCallRecord> calls_;
};

/// Mode and side-channels for one forward pass.
struct ForwardContext {
  bool train = false;
  std::uint64_t dropout_seed = 0;
  MacCounter* counter = nullptr;

  // Dropout stream for a named site; independent of every other site.
  Rng dropout_stream(std::string_view site) const { return Rng(dropout_seed).derive(site); }
};

template <typename S>
BasicTensor<S> apply_dropout(const BasicTensor<S>& x, double p, const ForwardContext& ctx,
                             std::string_view site) {
  if (!ctx.train || p == 0.0) return x;
  Rng rng = ctx.dropout_stream(site);
  return dropout(x, p, true, rng);
}

struct ParameterSpec {
  std::string name;
  Shape shape;
  InitKind init = InitKind::kXavierUniform;
};

template <typename S>
void add_parameters(ParameterStore<S>& store, const std::vector<ParameterSpec>& specs, const Rng& root) {
  for (const auto& p : specs) store.add(p.name, init_parameter<S>(p.shape, p.init, root, p.name));
}

inline void linear_spec(std::vector<ParameterSpec>& out, const std::string& prefix, std::int64_t in,
                        std::int64_t outdim, bool with_bias = true) {
  out.push_back({prefix + ".weight", {in, outdim}, InitKind::kXavierUniform});
  if (with_bias) out.push_back({prefix + ".bias", {outdim}, InitKind::kZeros});
}

inline void norm_spec(std::vector<ParameterSpec>& out, const std::string& prefix, std::int64_t n) {
  out.push_back({prefix + ".gain", {n}, InitKind::kOnes});
  out.push_back({prefix + ".bias", {n}, InitKind::kZeros});
}

template <typename S>
BasicTensor<S> linear(const BasicTensor<S>& x, const BasicTensor<S>& weight, const BasicTensor<S>& bias) {
  auto y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

template <typename S>
struct LinearWeights {
  BasicTensor<S> weight, bias;
  static LinearWeights bind(const ParameterStore<S>& p, const std::string& prefix, bool with_bias = true) {
    return {p.get(prefix + ".weight"), with_bias ? p.get(prefix + ".bias") : BasicTensor<S>()};
  }
  BasicTensor<S> operator()(const BasicTensor<S>& x) const { return linear(x, weight, bias); }
};

template <typename S>
struct NormWeights {
  BasicTensor<S> gain, bias;
  static NormWeights bind(const ParameterStore<S>& p, const std::string& prefix) {
    return {p.get(prefix + ".gain"), p.get(prefix + ".bias")};
  }
  BasicTensor<S> operator()(const BasicTensor<S>& x) const { return layer_norm(x, gain, bias, -1); }
};

// [B, T, 1] style 0/1 multiplier that zeroes frames at or past each length.
template <typename S>
BasicTensor<S> frame_keep_tensor(const std::vector<std::int64_t>& lengths, std::int64_t frames, Shape shape) {
  std::vector<S> v(lengths.size() * static_cast<std::size_t>(frames), S{0});
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    for (std::int64_t t = 0; t < std::min(frames, lengths[b]); ++t) v[b * frames + t] = S{1};
  }
  return BasicTensor<S>::from_data(std::move(shape), std::move(v));
}

}  // namespace trasr
