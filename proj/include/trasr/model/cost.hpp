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

#include "trasr/model/context.hpp"
#include "trasr/model/decoder.hpp"
#include "trasr/model/encoder.hpp"

namespace trasr {

/// Analytic attention multiply-adds for one sequence of T input frames, in
/// the order a counted forward pass records them. decoder_length > 0 adds
/// the decoder's self- and cross-attention for a prefix of that length.
inline std::vector<AttentionCallRecord> count_attention_macs(const ModelConfig& cfg, std::int64_t T,
                                                             std::int64_t decoder_length = 0) {
  std::vector<AttentionCallRecord> out;
  MacCounter c;
  std::int64_t n = output_length(cfg.frontend.kind, T);
  const auto tr = cfg.reductions_before();
  std::size_t next_tr = 0;
  for (int i = 0; i < cfg.encoder_layers(); ++i) {
    while (next_tr < tr.size() && tr[next_tr] == i) {
      n /= 2;
      ++next_tr;
    }
    c.set_label(encoder_layer_prefix(i));
    c.record(n, n, cfg.d_att);
  }
  while (next_tr < tr.size()) {
    n /= 2;
    ++next_tr;
  }
  for (int j = 0; j < cfg.d && decoder_length > 0; ++j) {
    const auto p = decoder_layer_prefix("dec", j);
    c.set_label(p + ".self_attn");
    c.record(decoder_length, decoder_length, cfg.d_att);
    c.set_label(p + ".src_attn");
    c.record(decoder_length, n, cfg.d_att);
  }
  return c.calls();
}

inline std::int64_t total_macs(const std::vector<AttentionCallRecord>& calls) {
  std::int64_t t = 0;
  for (const auto& c : calls) t += c.total();
  return t;
}

inline std::int64_t score_macs_with_prefix(const std::vector<AttentionCallRecord>& calls, std::string_view prefix) {
  std::int64_t t = 0;
  for (const auto& c : calls) {
    if (std::string_view(c.label).substr(0, prefix.size()) == prefix) t += c.score_macs;
  }
  return t;
}

}  // namespace trasr
