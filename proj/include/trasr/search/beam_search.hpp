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
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/search/ctc_prefix.hpp"

namespace trasr {

/// Next-token log-probabilities [n][V] for n prefixes of equal length, each
/// starting with sos.
using PrefixScorer = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<std::int64_t>>&)>;

struct BeamConfig {
  int beam_size = 20;
  double lambda = 0.5;             // CTC weight
  double gamma = 0.7;              // LM weight
  double insertion_penalty = 2.0;  // added per emitted token, outside the (1 - lambda) weighting
  double max_len_ratio = 1.0;      // of encoder frames
  std::int64_t max_length = 0;     // > 0 overrides the ratio
  std::int64_t sos = 2, eos = 3, blank = 0;
  std::vector<std::int64_t> excluded;  // never emitted (besides blank and sos)

  void validate() const {
    if (beam_size < 1) throw ConfigError("beam size must be at least 1");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("CTC weight must be in [0, 1]");
    if (gamma < 0.0) throw ConfigError("LM weight must be non-negative");
    if (max_len_ratio <= 0.0 && max_length <= 0) throw ConfigError("length budget must be positive");
  }

  std::int64_t length_budget(std::int64_t frames) const {
    if (max_length > 0) return max_length;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(max_len_ratio * static_cast<double>(frames))));
  }
};

struct Hypothesis {
  std::vector<std::int64_t> tokens;  // starts with sos; ends with eos once finished
  double s2s_logp = 0.0;
  double ctc_logp = 0.0;  // prefix log-probability, or full-sequence at eos
  double lm_logp = 0.0;
  CtcPrefixState ctc_state;
  bool finished = false;
  double score = 0.0;

  // Tokens between sos and eos.
  std::vector<std::int64_t> body() const {
    auto b = std::vector<std::int64_t>(tokens.begin() + 1, tokens.end() - (finished ? 1 : 0));
    return b;
  }
};

struct SearchInputs {
  PrefixScorer decoder;
  const CtcPrefixScorer* ctc = nullptr;  // required when lambda > 0
  PrefixScorer lm;                       // required when gamma > 0
  std::int64_t frames = 1;               // encoder frames, for the length budget
};

struct BeamResult {
  Hypothesis best;
  bool finished = false;  // false: budget ran out, best unfinished returned
};

/// Combined score; zero-weight terms are skipped so -inf never meets 0.
inline double combined_score(double s2s, double ctc, double lm, std::int64_t tokens, const BeamConfig& cfg) {
  double s = 0.0;
  if (cfg.lambda < 1.0) s += (1.0 - cfg.lambda) * s2s;
  if (cfg.lambda > 0.0) s += cfg.lambda * ctc;
  if (cfg.gamma > 0.0) s += cfg.gamma * lm;
  return s + cfg.insertion_penalty * static_cast<double>(tokens);
}

namespace detail {

inline bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;  // deterministic tie-break
}

}  // namespace detail

/// Joint CTC/attention beam search with shallow LM fusion.
inline BeamResult beam_search(const SearchInputs& in, const BeamConfig& cfg) {
  cfg.validate();
  if (!in.decoder) throw Error("beam search needs a decoder scorer");
  if (cfg.lambda > 0.0 && !in.ctc) throw Error("CTC weight is non-zero but no CTC scores were given");
  if (cfg.gamma > 0.0 && !in.lm) throw ConfigError("LM weight is non-zero but no language model was given");
  const std::int64_t budget = cfg.length_budget(in.frames);
  const bool use_ctc = cfg.lambda > 0.0, use_lm = cfg.gamma > 0.0;

  Hypothesis root;
  root.tokens = {cfg.sos};
  if (use_ctc) root.ctc_state = in.ctc->initial();
  root.score = combined_score(0.0, 0.0, 0.0, 0, cfg);
  std::vector<Hypothesis> running{root}, finished;

  for (std::int64_t len = 0; len <= budget && !running.empty(); ++len) {
    std::vector<std::vector<std::int64_t>> prefixes;
    for (const auto& h : running) prefixes.push_back(h.tokens);
    const auto dec = in.decoder(prefixes);
    std::vector<std::vector<double>> lmv;
    if (use_lm) lmv = in.lm(prefixes);
    const auto V = static_cast<std::int64_t>(dec.at(0).size());
    if (use_lm && static_cast<std::int64_t>(lmv.at(0).size()) != V) {
      throw Error("LM vocabulary size differs from the decoder's");
    }

    std::vector<Hypothesis> cand;
    for (std::size_t i = 0; i < running.size(); ++i) {
      const auto& h = running[i];
      for (std::int64_t c = 0; c < V; ++c) {
        const bool is_eos = c == cfg.eos;
        if (!is_eos) {
          if (len == budget || c == cfg.blank || c == cfg.sos) continue;
          if (std::find(cfg.excluded.begin(), cfg.excluded.end(), c) != cfg.excluded.end()) continue;
        }
        Hypothesis n;
        n.tokens = h.tokens;
        n.tokens.push_back(c);
        n.s2s_logp = h.s2s_logp + dec[i][c];
        n.lm_logp = use_lm ? h.lm_logp + lmv[i][c] : 0.0;
        if (use_ctc) {
          if (is_eos) {
            n.ctc_logp = in.ctc->final_score(h.ctc_state);
          } else {
            n.ctc_state = in.ctc->extend(h.ctc_state, c);
            n.ctc_logp = n.ctc_state.psi;
          }
        }
        n.finished = is_eos;
        n.score = combined_score(n.s2s_logp, n.ctc_logp, n.lm_logp, len + (is_eos ? 0 : 1), cfg);
        cand.push_back(std::move(n));
      }
    }
    const auto keep = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(cfg.beam_size));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), detail::better);
    running.clear();
    for (std::size_t k = 0; k < keep; ++k) {
      (cand[k].finished ? finished : running).push_back(std::move(cand[k]));
    }
    if (!finished.empty() && !running.empty()) {
      // Extensions only lower s2s, CTC-prefix and LM terms; the insertion
      // bonus is the sole way a running hypothesis can still gain.
      const auto& bf = *std::min_element(finished.begin(), finished.end(), detail::better);
      const auto& br = *std::min_element(running.begin(), running.end(), detail::better);
      const double bonus = std::max(0.0, cfg.insertion_penalty) * static_cast<double>(budget - len - 1);
      if (bf.score >= br.score + bonus) break;
    }
  }
  BeamResult r;
  if (!finished.empty()) {
    r.best = *std::min_element(finished.begin(), finished.end(), detail::better);
    r.finished = true;
  } else if (!running.empty()) {
    r.best = *std::min_element(running.begin(), running.end(), detail::better);
  } else {
    r.best = root;
  }
  return r;
}

}  // namespace trasr
