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
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "trasr/model/asr_model.hpp"
#include "trasr/model/cost.hpp"

namespace trasr {

enum class EncoderVariant { kNoReduction, kTr0, kTr2, kPyramidal };

inline const char* to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kNoReduction: return "no-tr";
    case EncoderVariant::kTr0: return "tr0";
    case EncoderVariant::kTr2: return "tr2";
    case EncoderVariant::kPyramidal: return "pyramidal";
  }
  return "?";
}

/// `base` with its encoder rearranged: every variant keeps the total layer
/// count.
inline ModelConfig with_variant(ModelConfig base, EncoderVariant v, FrontendKind frontend) {
  const int layers = base.encoder_layers();
  base.frontend.kind = frontend;
  base.frontend.channels.clear();
  base.tr_enabled = v == EncoderVariant::kTr0 || v == EncoderVariant::kTr2;
  base.pyramidal = v == EncoderVariant::kPyramidal;
  base.e1 = v == EncoderVariant::kTr0 ? 0 : v == EncoderVariant::kTr2 ? std::min(2, layers) : 0;
  base.e2 = layers - base.e1;
  return base;
}

struct BenchmarkCell {
  std::int64_t length = 0;
  EncoderVariant variant{};
  FrontendKind frontend{};
  std::int64_t analytic_macs = 0;
  std::int64_t measured_macs = 0;
  bool records_match = false;     // every call, in order
  double median_seconds = 0.0;
  int repetitions = 0;
  std::int64_t frames_after_frontend = 0;
  std::int64_t encoder_frames = 0;
};

/// Counted encoder forward on zero features of length T.
template <typename S>
std::vector<AttentionCallRecord> measure_attention_macs(const ModelConfig& cfg, const ParameterStore<S>& params,
                                                        std::int64_t T) {
  NoGradGuard guard;
  MacCounter counter;
  ForwardContext ctx;
  ctx.counter = &counter;
  auto x = BasicTensor<S>::zeros({1, T, cfg.frontend.feature_dim});
  encode(x, {T}, cfg, params, ctx);
  return counter.calls();
}

template <typename S = float>
std::vector<BenchmarkCell> run_benchmark(const ModelConfig& base, const std::vector<std::int64_t>& lengths,
                                         int repetitions, std::uint64_t seed = 1) {
  const std::vector<EncoderVariant> variants{EncoderVariant::kNoReduction, EncoderVariant::kTr0, EncoderVariant::kTr2,
                                             EncoderVariant::kPyramidal};
  const std::vector<FrontendKind> frontends{FrontendKind::kConv2d4, FrontendKind::kConv2d8, FrontendKind::kVggConv2d4,
                                            FrontendKind::kVggConv2d8, FrontendKind::kIdentity};
  std::vector<BenchmarkCell> cells;
  for (auto fk : frontends) {
    for (auto v : variants) {
      const auto cfg = with_variant(base, v, fk);
      if (v == EncoderVariant::kPyramidal && cfg.encoder_layers() < 3) continue;
      cfg.validate();
      const auto params = init_model_parameters<S>(cfg, seed);
      for (auto T : lengths) {
        if (T < minimum_input_length(fk)) {
          throw SequenceTooShortError("benchmark length " + std::to_string(T) + " below the " + std::string(to_string(fk)) +
                                      " minimum of " + std::to_string(minimum_input_length(fk)));
        }
        if (encoder_output_length(cfg, T) < 1) {
          throw SequenceTooShortError("benchmark length " + std::to_string(T) + " leaves no encoder frames for " +
                                      std::string(to_string(fk)) + " with " + to_string(v));
        }
        BenchmarkCell c;
        c.length = T;
        c.variant = v;
        c.frontend = fk;
        const auto analytic = count_attention_macs(cfg, T);
        const auto measured = measure_attention_macs(cfg, params, T);
        c.analytic_macs = total_macs(analytic);
        c.measured_macs = total_macs(measured);
        c.records_match = analytic == measured;
        c.frames_after_frontend = output_length(fk, T);
        c.encoder_frames = encoder_output_length(cfg, T);
        std::vector<double> times;
        for (int r = 0; r < repetitions; ++r) {
          const auto t0 = std::chrono::steady_clock::now();
          measure_attention_macs(cfg, params, T);
          times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        if (!times.empty()) {
          std::sort(times.begin(), times.end());
          const auto n = times.size();
          c.median_seconds = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
        }
        c.repetitions = repetitions;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

inline std::string benchmark_csv(const std::vector<BenchmarkCell>& cells) {
  std::string s = "length,frontend,encoder,frontend_frames,encoder_frames,analytic_macs,measured_macs,match,median_seconds,repetitions\n";
  char buf[512];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%s,%lld,%lld,%lld,%lld,%s,%.6g,%d\n", static_cast<long long>(c.length),
                  std::string(to_string(c.frontend)).c_str(), to_string(c.variant), static_cast<long long>(c.frames_after_frontend),
                  static_cast<long long>(c.encoder_frames), static_cast<long long>(c.analytic_macs),
                  static_cast<long long>(c.measured_macs), c.records_match ? "yes" : "no", c.median_seconds,
                  c.repetitions);
    s += buf;
  }
  return s;
}

inline std::string benchmark_table(const std::vector<BenchmarkCell>& cells) {
  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%7s  %-11s %-10s %8s %8s %16s %16s %6s %12s\n", "length", "frontend", "encoder",
                "X0", "enc", "analytic MACs", "measured MACs", "match", "median ms");
  s += buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%7lld  %-11s %-10s %8lld %8lld %16lld %16lld %6s %12.3f\n",
                  static_cast<long long>(c.length), std::string(to_string(c.frontend)).c_str(), to_string(c.variant),
                  static_cast<long long>(c.frames_after_frontend), static_cast<long long>(c.encoder_frames),
                  static_cast<long long>(c.analytic_macs), static_cast<long long>(c.measured_macs),
                  c.records_match ? "yes" : "NO", 1e3 * c.median_seconds);
    s += buf;
  }
  return s;
}

}  // namespace trasr
