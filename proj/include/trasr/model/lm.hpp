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

#include "trasr/model/decoder.hpp"

namespace trasr {

/// Decoder-only language model over the ASR vocabulary.
struct LmConfig {
  std::int64_t vocab_size = 0;
  int layers = 2;
  std::int64_t d_att = 64;
  std::int64_t d_ff = 256;
  std::int64_t heads = 4;
  double dropout_rate = 0.0;

  void validate() const {
    if (vocab_size < 5) throw ConfigError("LM vocabulary must include the 5 reserved symbols");
    if (layers < 0) throw ConfigError("LM layer count must be non-negative");
    if (d_att < 2 || d_att % 2 != 0 || heads < 1 || d_att % heads != 0) {
      throw ConfigError("LM d_att must be even and divisible by heads");
    }
    if (d_ff < 1) throw ConfigError("LM d_ff must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("LM dropout rate must be in [0, 1)");
  }

  DecoderStackOptions stack() const { return {"lm", layers, heads, dropout_rate, true}; }
};

inline std::vector<ParameterSpec> lm_parameter_specs(const LmConfig& cfg) {
  cfg.validate();
  return decoder_stack_specs("lm", cfg.layers, cfg.vocab_size, cfg.d_att, cfg.d_ff, false, true);
}

template <typename S>
ParameterStore<S> init_lm_parameters(const LmConfig& cfg, std::uint64_t seed) {
  ParameterStore<S> p;
  add_parameters(p, lm_parameter_specs(cfg), Rng(seed).derive("lm"));
  return p;
}

/// Logits [B, U, V] for next-token prediction.
template <typename S>
BasicTensor<S> lm_forward(const std::vector<std::int64_t>& tokens, std::int64_t B, std::int64_t U,
                          const std::vector<std::int64_t>& lengths, const LmConfig& cfg,
                          const ParameterStore<S>& params, const ForwardContext& ctx = {}) {
  return decoder_stack_forward<S>(tokens, B, U, lengths, nullptr, cfg.stack(), params, ctx);
}

}  // namespace trasr
