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
#include <string>
#include <vector>

#include "trasr/app/config.hpp"
#include "trasr/core/adam.hpp"
#include "trasr/data/batching.hpp"
#include "trasr/model/lm.hpp"
#include "trasr/objectives/losses.hpp"

namespace trasr {

namespace detail {

// sos + y -> y + eos rows for a batch of token sequences.
struct LmBatch {
  std::int64_t B = 0, U = 0;
  std::vector<std::int64_t> input, output, lengths;
  std::vector<std::uint8_t> keep;
};

inline LmBatch lm_batch(const std::vector<std::vector<std::int64_t>>& sentences, const std::vector<std::size_t>& idx) {
  LmBatch b;
  b.B = static_cast<std::int64_t>(idx.size());
  for (auto i : idx) b.U = std::max<std::int64_t>(b.U, static_cast<std::int64_t>(sentences[i].size()) + 1);
  b.input.assign(static_cast<std::size_t>(b.B * b.U), Vocabulary::kPad);
  b.output.assign(b.input.size(), Vocabulary::kPad);
  b.keep.assign(b.input.size(), 0);
  for (std::int64_t r = 0; r < b.B; ++r) {
    const auto& y = sentences[idx[static_cast<std::size_t>(r)]];
    const auto n = static_cast<std::int64_t>(y.size());
    auto at = [&](std::int64_t u) { return static_cast<std::size_t>(r * b.U + u); };
    b.input[at(0)] = Vocabulary::kSos;
    for (std::int64_t u = 0; u < n; ++u) {
      b.input[at(u + 1)] = y[static_cast<std::size_t>(u)];
      b.output[at(u)] = y[static_cast<std::size_t>(u)];
    }
    b.output[at(n)] = Vocabulary::kEos;
    for (std::int64_t u = 0; u <= n; ++u) b.keep[at(u)] = 1;
    b.lengths.push_back(n + 1);
  }
  return b;
}

inline std::vector<std::int64_t> sentence_lengths(const std::vector<std::vector<std::int64_t>>& s) {
  std::vector<std::int64_t> out;
  for (const auto& x : s) out.push_back(static_cast<std::int64_t>(x.size()) + 1);
  return out;
}

}  // namespace detail

/// Per-token perplexity, eos included.
template <typename S>
double lm_perplexity(const LmConfig& cfg, const ParameterStore<S>& params,
                     const std::vector<std::vector<std::int64_t>>& sentences, std::int64_t batch_size = 32) {
  NoGradGuard guard;
  double nll = 0.0;
  std::int64_t tokens = 0;
  for (const auto& idx : make_batches(detail::sentence_lengths(sentences), batch_size, true, 0, false)) {
    auto b = detail::lm_batch(sentences, idx);
    auto logits = lm_forward(b.input, b.B, b.U, b.lengths, cfg, params, {});
    auto l = ce_label_smoothed(reshape(logits, {b.B * b.U, cfg.vocab_size}), b.output, b.keep, 0.0);
    const auto n = detail::kept_rows(b.keep);
    nll += static_cast<double>(l.item()) * static_cast<double>(n);
    tokens += n;
  }
  return std::exp(nll / static_cast<double>(std::max<std::int64_t>(tokens, 1)));
}

struct LmEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double perplexity = 0.0;
};

/// Next-token cross-entropy training of the decoder-only LM.
template <typename S>
std::vector<LmEpoch> train_lm(const LmConfig& cfg, const LmTrainConfig& tc, std::uint64_t seed,
                              const std::vector<std::vector<std::int64_t>>& sentences, ParameterStore<S>& params) {
  if (sentences.empty()) throw Error("LM training needs at least one transcript");
  if (tc.epochs < 1) throw ConfigError("lm.epochs must be at least 1");
  AdamState<S> adam;
  adam.schedule = LearningRateSchedule::noam(tc.lr_scale, cfg.d_att, tc.warmup);
  const Rng run(seed);
  std::vector<LmEpoch> out;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const Rng er = run.derive("lm-epoch").derive(static_cast<std::uint64_t>(epoch));
    double sum = 0.0;
    std::int64_t tokens = 0;
    for (const auto& idx : make_batches(detail::sentence_lengths(sentences), tc.batch_size, true, er.seed())) {
      auto b = detail::lm_batch(sentences, idx);
      const std::uint64_t step = params.step_count() + 1;
      ForwardContext ctx{true, run.derive("lm-dropout").derive(step).next_u64(), nullptr};
      auto logits = lm_forward(b.input, b.B, b.U, b.lengths, cfg, params, ctx);
      auto loss = ce_label_smoothed(reshape(logits, {b.B * b.U, cfg.vocab_size}), b.output, b.keep, 0.0);
      if (!std::isfinite(loss.item())) throw NumericError("non-finite LM loss at epoch " + std::to_string(epoch));
      loss.backward();
      for (auto& [name, p] : params) p.grad_mut();
      adam_step(params, adam);
      const auto n = detail::kept_rows(b.keep);
      sum += static_cast<double>(loss.item()) * static_cast<double>(n);
      tokens += n;
    }
    out.push_back({epoch, sum / static_cast<double>(tokens), lm_perplexity(cfg, params, sentences, tc.batch_size)});
  }
  return out;
}

}  // namespace trasr
