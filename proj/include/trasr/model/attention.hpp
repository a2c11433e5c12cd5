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
#include <string>
#include <vector>

#include "trasr/core/ops.hpp"
#include "trasr/model/context.hpp"

namespace trasr {

/// Keeps keys j < length[b]; shape [B, 1, 1, n_k].
inline Mask key_padding_mask(const std::vector<std::int64_t>& lengths, std::int64_t n_k) {
  const auto B = static_cast<std::int64_t>(lengths.size());
  Mask m{{B, 1, 1, n_k}, std::vector<std::uint8_t>(static_cast<std::size_t>(B * n_k), 0)};
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t j = 0; j < std::min(n_k, lengths[b]); ++j) m.keep[b * n_k + j] = 1;
  }
  return m;
}

/// Lower-triangular [1, 1, n, n] mask.
inline Mask causal_mask(std::int64_t n) {
  Mask m{{1, 1, n, n}, std::vector<std::uint8_t>(static_cast<std::size_t>(n * n), 0)};
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) m.keep[i * n + j] = 1;
  }
  return m;
}

/// Causal and key-padding combined; shape [B, 1, n, n].
inline Mask causal_padding_mask(const std::vector<std::int64_t>& lengths, std::int64_t n) {
  const auto B = static_cast<std::int64_t>(lengths.size());
  Mask m{{B, 1, n, n}, std::vector<std::uint8_t>(static_cast<std::size_t>(B * n * n), 0)};
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t i = 0; i < n; ++i) {
      // Padded query rows still see position 0 so no slice is empty.
      const std::int64_t last = std::min(i, std::max<std::int64_t>(lengths[b] - 1, 0));
      for (std::int64_t j = 0; j <= last; ++j) m.keep[(b * n + i) * n + j] = 1;
    }
  }
  return m;
}

/// softmax(Q K^T / sqrt(d_k), mask) V over trailing two axes.
template <typename S>
BasicTensor<S> attention(const BasicTensor<S>& q, const BasicTensor<S>& k, const BasicTensor<S>& v,
                         const Mask* mask) {
  const std::int64_t dk = q.dim(-1);
  auto scores = scale(matmul(q, transpose(k, -2, -1)), static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk))));
  return matmul(masked_softmax(scores, mask, -1), v);
}

template <typename S>
struct AttentionWeights {
  BasicTensor<S> wq, wk, wv, wo;

  static AttentionWeights bind(const ParameterStore<S>& p, const std::string& prefix) {
    return {p.get(prefix + ".wq"), p.get(prefix + ".wk"), p.get(prefix + ".wv"), p.get(prefix + ".wo")};
  }
};

inline void attention_spec(std::vector<ParameterSpec>& out, const std::string& prefix, std::int64_t d_att) {
  for (const char* w : {".wq", ".wk", ".wv", ".wo"}) {
    out.push_back({prefix + w, {d_att, d_att}, InitKind::kXavierUniform});
  }
}

namespace detail {

// [B, n, D] -> [B, h, n, D/h]
template <typename S>
BasicTensor<S> split_heads(const BasicTensor<S>& x, std::int64_t h) {
  const std::int64_t B = x.dim(0), n = x.dim(1), D = x.dim(2);
  return permute(reshape(x, {B, n, h, D / h}), {0, 2, 1, 3});
}

template <typename S>
BasicTensor<S> merge_heads(const BasicTensor<S>& x) {
  const std::int64_t B = x.dim(0), h = x.dim(1), n = x.dim(2), dk = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {B, n, h * dk});
}

}  // namespace detail

/// Multi-head attention over batched x_q [B, n_q, D] and x_kv [B, n_k, D].
/// Per-sequence true lengths feed only the op counter.
template <typename S>
BasicTensor<S> multi_head_attention(const BasicTensor<S>& x_q, const BasicTensor<S>& x_kv,
                                    const AttentionWeights<S>& w, std::int64_t heads, const Mask* mask,
                                    const std::vector<std::int64_t>& query_lengths,
                                    const std::vector<std::int64_t>& key_lengths, const ForwardContext& ctx) {
  const std::int64_t D = x_q.dim(-1);
  if (D % heads != 0) throw DimensionError("d_att " + std::to_string(D) + " not divisible by " + std::to_string(heads) + " heads");
  auto q = detail::split_heads(matmul(x_q, w.wq), heads);
  auto k = detail::split_heads(matmul(x_kv, w.wk), heads);
  auto v = detail::split_heads(matmul(x_kv, w.wv), heads);
  auto y = matmul(detail::merge_heads(attention(q, k, v, mask)), w.wo);
  if (ctx.counter) {
    for (std::size_t b = 0; b < query_lengths.size(); ++b) ctx.counter->record(query_lengths[b], key_lengths[b], D);
  }
  return y;
}

template <typename S>
struct FeedForwardWeights {
  LinearWeights<S> w1, w2;
  static FeedForwardWeights bind(const ParameterStore<S>& p, const std::string& prefix) {
    return {LinearWeights<S>::bind(p, prefix + ".w1"), LinearWeights<S>::bind(p, prefix + ".w2")};
  }
};

inline void ffn_spec(std::vector<ParameterSpec>& out, const std::string& prefix, std::int64_t d_att,
                     std::int64_t d_ff) {
  linear_spec(out, prefix + ".w1", d_att, d_ff);
  linear_spec(out, prefix + ".w2", d_ff, d_att);
}

/// ReLU(x W1 + b1) W2 + b2, per frame.
template <typename S>
BasicTensor<S> position_wise_ffn(const BasicTensor<S>& x, const FeedForwardWeights<S>& w, double dropout_rate,
                                 const ForwardContext& ctx, std::string_view site) {
  auto h = relu(w.w1(x));
  h = apply_dropout(h, dropout_rate, ctx, site);
  return w.w2(h);
}

}  // namespace trasr
