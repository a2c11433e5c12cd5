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

#include "trasr/frontend/positional_encoding.hpp"
#include "trasr/model/attention.hpp"
#include "trasr/model/config.hpp"

namespace trasr {

inline std::string decoder_layer_prefix(const std::string& root, int j) {
  return root + ".layer" + std::to_string(j);
}

// Shared by the ASR decoder ("dec", with cross-attention) and the LM ("lm",
// self-attention only).
inline std::vector<ParameterSpec> decoder_stack_specs(const std::string& root, int layers, std::int64_t vocab,
                                                      std::int64_t d_att, std::int64_t d_ff, bool cross, bool pre_norm) {
  std::vector<ParameterSpec> out;
  out.push_back({root + ".embed", {vocab, d_att}, InitKind::kXavierUniform});
  for (int j = 0; j < layers; ++j) {
    const auto p = decoder_layer_prefix(root, j);
    norm_spec(out, p + ".norm1", d_att);
    attention_spec(out, p + ".self_attn", d_att);
    if (cross) {
      norm_spec(out, p + ".norm2", d_att);
      attention_spec(out, p + ".src_attn", d_att);
    }
    norm_spec(out, p + ".norm3", d_att);
    ffn_spec(out, p + ".ffn", d_att, d_ff);
  }
  if (pre_norm) norm_spec(out, root + ".norm", d_att);
  linear_spec(out, root + ".out", d_att, vocab);
  return out;
}

inline std::vector<ParameterSpec> decoder_parameter_specs(const ModelConfig& cfg) {
  return decoder_stack_specs("dec", cfg.d, cfg.vocab_size, cfg.d_att, cfg.d_ff, true, cfg.pre_norm);
}

/// Cross-attention memory for the decoder: X_e [B_e, n, D] with true lengths.
/// B_e may be 1 and broadcast against a larger prefix batch.
template <typename S>
struct DecoderMemory {
  BasicTensor<S> x;
  std::vector<std::int64_t> lengths;
};

struct DecoderStackOptions {
  std::string root = "dec";
  int layers = 0;
  std::int64_t heads = 4;
  double dropout_rate = 0.0;
  bool pre_norm = true;
};

namespace detail {

inline std::vector<std::int64_t> expand_lengths(const std::vector<std::int64_t>& l, std::size_t n) {
  return l.size() == n ? l : std::vector<std::int64_t>(n, l.empty() ? 0 : l[0]);
}

}  // namespace detail

/// Token prefixes [B, U] (row-major ids, each starting with sos) to logits
/// [B, U, V]. `memory` null means no cross-attention (LM).
template <typename S>
BasicTensor<S> decoder_stack_forward(const std::vector<std::int64_t>& tokens, std::int64_t B, std::int64_t U,
                                     const std::vector<std::int64_t>& token_lengths, const DecoderMemory<S>* memory,
                                     const DecoderStackOptions& opt, const ParameterStore<S>& params,
                                     const ForwardContext& ctx) {
  if (U < 1) throw DimensionError("decoder needs a non-empty prefix");
  if (static_cast<std::int64_t>(tokens.size()) != B * U) throw DimensionError("token batch does not match [B, U]");
  const auto& embed = params.get(opt.root + ".embed");
  const std::int64_t D = embed.dim(1);
  auto x = scale(embedding_lookup(embed, tokens, {B, U}), static_cast<S>(std::sqrt(static_cast<double>(D))));
  x = apply_dropout(add_positional_encoding(x), opt.dropout_rate, ctx, opt.root + ".input");

  const auto tl = detail::expand_lengths(token_lengths, static_cast<std::size_t>(B));
  const Mask self_mask = causal_padding_mask(tl, U);
  Mask src_mask;
  std::vector<std::int64_t> src_len;
  if (memory) {
    src_len = detail::expand_lengths(memory->lengths, static_cast<std::size_t>(B));
    src_mask = key_padding_mask(memory->lengths, memory->x.dim(1));
  }
  auto drop = [&](const BasicTensor<S>& t, const std::string& site) {
    return apply_dropout(t, opt.dropout_rate, ctx, site);
  };
  for (int j = 0; j < opt.layers; ++j) {
    const auto p = decoder_layer_prefix(opt.root, j);
    const auto self_w = AttentionWeights<S>::bind(params, p + ".self_attn");
    const auto n1 = NormWeights<S>::bind(params, p + ".norm1");
    const auto n3 = NormWeights<S>::bind(params, p + ".norm3");
    const auto ffn_w = FeedForwardWeights<S>::bind(params, p + ".ffn");
    auto self_attn = [&](const BasicTensor<S>& in) {
      if (ctx.counter) ctx.counter->set_label(p + ".self_attn");
      return drop(multi_head_attention(in, in, self_w, opt.heads, &self_mask, tl, tl, ctx), p + ".self_attn");
    };
    auto ffn = [&](const BasicTensor<S>& in) {
      return drop(position_wise_ffn(in, ffn_w, opt.dropout_rate, ctx, p + ".ffn.hidden"), p + ".ffn");
    };
    if (opt.pre_norm) {
      x = add(x, self_attn(n1(x)));
    } else {
      x = n1(add(x, self_attn(x)));
    }
    if (memory) {
      const auto src_w = AttentionWeights<S>::bind(params, p + ".src_attn");
      const auto n2 = NormWeights<S>::bind(params, p + ".norm2");
      auto src_attn = [&](const BasicTensor<S>& in) {
        if (ctx.counter) ctx.counter->set_label(p + ".src_attn");
        return drop(multi_head_attention(in, memory->x, src_w, opt.heads, &src_mask, tl, src_len, ctx),
                    p + ".src_attn");
      };
      x = opt.pre_norm ? add(x, src_attn(n2(x))) : n2(add(x, src_attn(x)));
    }
    x = opt.pre_norm ? add(x, ffn(n3(x))) : n3(add(x, ffn(x)));
  }
  if (opt.pre_norm) x = NormWeights<S>::bind(params, opt.root + ".norm")(x);
  return LinearWeights<S>::bind(params, opt.root + ".out")(x);
}

template <typename S>
BasicTensor<S> decode_forward(const std::vector<std::int64_t>& tokens, std::int64_t B, std::int64_t U,
                              const std::vector<std::int64_t>& token_lengths, const DecoderMemory<S>& memory,
                              const ModelConfig& cfg, const ParameterStore<S>& params, const ForwardContext& ctx = {}) {
  const DecoderStackOptions opt{"dec", cfg.d, cfg.heads, cfg.dropout_rate, cfg.pre_norm};
  return decoder_stack_forward(tokens, B, U, token_lengths, &memory, opt, params, ctx);
}

}  // namespace trasr
