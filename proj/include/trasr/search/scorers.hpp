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

#include "trasr/model/asr_model.hpp"
#include "trasr/model/lm.hpp"
#include "trasr/search/beam_search.hpp"

namespace trasr {

namespace detail {

// Last-position log-softmax rows of logits [n, U, V].
template <typename S>
std::vector<std::vector<double>> last_log_probs(const BasicTensor<S>& logits) {
  const std::int64_t n = logits.dim(0), U = logits.dim(1), V = logits.dim(2);
  auto lp = log_softmax(slice(logits, 1, U - 1, U), -1);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(V)));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t v = 0; v < V; ++v) out[i][v] = lp.data()[i * V + v];
  }
  return out;
}

inline std::vector<std::int64_t> flatten_prefixes(const std::vector<std::vector<std::int64_t>>& p, std::int64_t& U) {
  U = static_cast<std::int64_t>(p.at(0).size());
  std::vector<std::int64_t> flat;
  flat.reserve(p.size() * static_cast<std::size_t>(U));
  for (const auto& row : p) {
    if (static_cast<std::int64_t>(row.size()) != U) throw DimensionError("scored prefixes must share a length");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

}  // namespace detail

/// Decoder scorer over one utterance's encoder output.
template <typename S>
PrefixScorer make_decoder_scorer(const ModelConfig& cfg, const ParameterStore<S>& params, DecoderMemory<S> memory) {
  return [&cfg, &params, memory = std::move(memory)](const std::vector<std::vector<std::int64_t>>& prefixes) {
    NoGradGuard guard;
    std::int64_t U = 0;
    const auto flat = detail::flatten_prefixes(prefixes, U);
    const auto n = static_cast<std::int64_t>(prefixes.size());
    return detail::last_log_probs(decode_forward(flat, n, U, std::vector<std::int64_t>(prefixes.size(), U), memory,
                                                 cfg, params));
  };
}

/// Next-token log-probabilities of the LM after `prefix`.
template <typename S>
std::vector<double> lm_score(const LmConfig& cfg, const ParameterStore<S>& params,
                             const std::vector<std::int64_t>& prefix) {
  NoGradGuard guard;
  for (auto t : prefix) {
    if (t < 0 || t >= cfg.vocab_size) throw Error("token " + std::to_string(t) + " outside the LM vocabulary");
  }
  const auto U = static_cast<std::int64_t>(prefix.size());
  return detail::last_log_probs(lm_forward(prefix, 1, U, {U}, cfg, params)).at(0);
}

template <typename S>
PrefixScorer make_lm_scorer(const LmConfig& cfg, const ParameterStore<S>& params, std::int64_t expected_vocab) {
  if (cfg.vocab_size != expected_vocab) {
    throw ConfigError("LM vocabulary has " + std::to_string(cfg.vocab_size) + " symbols, the ASR model " +
                      std::to_string(expected_vocab));
  }
  return [&cfg, &params](const std::vector<std::vector<std::int64_t>>& prefixes) {
    NoGradGuard guard;
    std::int64_t U = 0;
    const auto flat = detail::flatten_prefixes(prefixes, U);
    const auto n = static_cast<std::int64_t>(prefixes.size());
    return detail::last_log_probs(lm_forward(flat, n, U, std::vector<std::int64_t>(prefixes.size(), U), cfg, params));
  };
}

/// CTC scorer from one utterance's CTC log-probabilities [1, n, V].
template <typename S>
CtcPrefixScorer make_ctc_scorer(const BasicTensor<S>& log_probs, std::int64_t frames, std::int64_t blank) {
  const std::int64_t V = log_probs.dim(-1);
  std::vector<double> v(log_probs.data().begin(), log_probs.data().begin() + frames * V);
  return CtcPrefixScorer(std::move(v), frames, V, blank);
}

}  // namespace trasr
