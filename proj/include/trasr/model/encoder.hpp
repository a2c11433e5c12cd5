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
#include <string>
#include <vector>

#include "trasr/model/attention.hpp"
#include "trasr/model/config.hpp"

namespace trasr {

inline std::string encoder_layer_prefix(int i) { return "enc.layer" + std::to_string(i); }

inline void encoder_layer_spec(std::vector<ParameterSpec>& out, const std::string& p, std::int64_t d_att,
                               std::int64_t d_ff) {
  norm_spec(out, p + ".norm1", d_att);
  attention_spec(out, p + ".mha", d_att);
  norm_spec(out, p + ".norm2", d_att);
  ffn_spec(out, p + ".ffn", d_att, d_ff);
}

inline std::vector<ParameterSpec> encoder_parameter_specs(const ModelConfig& cfg) {
  std::vector<ParameterSpec> out = frontend_parameter_specs(cfg.frontend_config());
  for (int i = 0; i < cfg.encoder_layers(); ++i) encoder_layer_spec(out, encoder_layer_prefix(i), cfg.d_att, cfg.d_ff);
  const auto tr = cfg.reductions_before();
  for (std::size_t k = 0; k < tr.size(); ++k) linear_spec(out, "enc.tr" + std::to_string(k), 2 * cfg.d_att, cfg.d_att);
  if (cfg.pre_norm) norm_spec(out, "enc.norm", cfg.d_att);
  return out;
}

template <typename S>
struct EncoderLayerWeights {
  NormWeights<S> norm1, norm2;
  AttentionWeights<S> mha;
  FeedForwardWeights<S> ffn;

  static EncoderLayerWeights bind(const ParameterStore<S>& p, const std::string& prefix) {
    return {NormWeights<S>::bind(p, prefix + ".norm1"), NormWeights<S>::bind(p, prefix + ".norm2"),
            AttentionWeights<S>::bind(p, prefix + ".mha"), FeedForwardWeights<S>::bind(p, prefix + ".ffn")};
  }
};

struct LayerOptions {
  std::int64_t heads = 4;
  double dropout_rate = 0.0;
  bool pre_norm = true;
  std::string site;  // dropout stream prefix
};

/// Pre-norm: x' = x + MHA(LN(x)); out = x' + FFN(LN(x')). Post-norm moves
/// each LN after its residual sum.
template <typename S>
BasicTensor<S> encoder_layer(const BasicTensor<S>& x, const std::vector<std::int64_t>& lengths,
                             const EncoderLayerWeights<S>& w, const LayerOptions& opt, const ForwardContext& ctx) {
  const Mask mask = key_padding_mask(lengths, x.dim(1));
  auto self_attn = [&](const BasicTensor<S>& in) {
    return apply_dropout(multi_head_attention(in, in, w.mha, opt.heads, &mask, lengths, lengths, ctx),
                         opt.dropout_rate, ctx, opt.site + ".mha");
  };
  auto ffn = [&](const BasicTensor<S>& in) {
    return apply_dropout(position_wise_ffn(in, w.ffn, opt.dropout_rate, ctx, opt.site + ".ffn.hidden"),
                         opt.dropout_rate, ctx, opt.site + ".ffn");
  };
  if (opt.pre_norm) {
    auto h = add(x, self_attn(w.norm1(x)));
    return add(h, ffn(w.norm2(h)));
  }
  auto h = w.norm1(add(x, self_attn(x)));
  return w.norm2(add(h, ffn(h)));
}

template <typename S>
struct EncoderOutput {
  BasicTensor<S> x;                   // [B, n, d_att]
  std::vector<std::int64_t> lengths;  // true frames per sequence
};

/// Concatenates frame pairs (2i, 2i+1) and projects 2D -> D. An odd final
/// frame is dropped.
template <typename S>
EncoderOutput<S> time_reduce(const BasicTensor<S>& x, const std::vector<std::int64_t>& lengths,
                             const LinearWeights<S>& proj) {
  const std::int64_t B = x.dim(0), n = x.dim(1), D = x.dim(2);
  if (n < 2) throw SequenceTooShortError("time reduction needs at least 2 frames, got " + std::to_string(n));
  std::vector<std::int64_t> out_len(lengths.size());
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    out_len[b] = lengths[b] / 2;
    if (out_len[b] < 1) {
      throw SequenceTooShortError("time reduction collapses sequence " + std::to_string(b) + " of length " +
                                  std::to_string(lengths[b]) + " to zero frames");
    }
  }
  const std::int64_t m = n / 2;
  auto even = 2 * m == n ? x : slice(x, 1, 0, 2 * m);
  return {proj(reshape(even, {B, m, 2 * D})), std::move(out_len)};
}

/// EncPre -> e1 layers -> TR -> e2 layers -> final norm. The pyramidal
/// variant reduces after each of the first three layers instead.
template <typename S>
EncoderOutput<S> encode(const BasicTensor<S>& features, const std::vector<std::int64_t>& lengths,
                        const ModelConfig& cfg, const ParameterStore<S>& params, const ForwardContext& ctx = {}) {
  auto sub = subsample(features, lengths, cfg.frontend_config(), params);
  EncoderOutput<S> h{apply_dropout(sub.x, cfg.dropout_rate, ctx, "enc.input"), std::move(sub.lengths)};
  const auto tr = cfg.reductions_before();
  std::size_t next_tr = 0;
  auto reduce = [&] {
    h = time_reduce(h.x, h.lengths, LinearWeights<S>::bind(params, "enc.tr" + std::to_string(next_tr)));
    ++next_tr;
  };
  const LayerOptions base{cfg.heads, cfg.dropout_rate, cfg.pre_norm, {}};
  for (int i = 0; i < cfg.encoder_layers(); ++i) {
    while (next_tr < tr.size() && tr[next_tr] == i) reduce();
    LayerOptions opt = base;
    opt.site = encoder_layer_prefix(i);
    if (ctx.counter) ctx.counter->set_label(opt.site);
    h.x = encoder_layer(h.x, h.lengths, EncoderLayerWeights<S>::bind(params, opt.site), opt, ctx);
  }
  while (next_tr < tr.size()) reduce();
  if (cfg.pre_norm) h.x = NormWeights<S>::bind(params, "enc.norm")(h.x);
  return h;
}

template <typename S>
EncoderOutput<S> pyramidal_encode(const BasicTensor<S>& features, const std::vector<std::int64_t>& lengths,
                                  ModelConfig cfg, const ParameterStore<S>& params, const ForwardContext& ctx = {}) {
  cfg.pyramidal = true;
  cfg.tr_enabled = false;
  cfg.validate();
  return encode(features, lengths, cfg, params, ctx);
}

/// Output frames of the whole encoder for an input of T frames; 0 if any
/// stage collapses.
inline std::int64_t encoder_output_length(const ModelConfig& cfg, std::int64_t T) {
  std::int64_t n = output_length(cfg.frontend.kind, T);
  for (std::size_t k = 0; k < cfg.reductions_before().size() && n > 0; ++k) n /= 2;
  return n;
}

}  // namespace trasr
