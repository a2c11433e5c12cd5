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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/ops.hpp"
#include "trasr/core/params.hpp"
#include "trasr/frontend/feature_sequence.hpp"
#include "trasr/frontend/positional_encoding.hpp"
#include "trasr/model/context.hpp"

namespace trasr {

enum class FrontendKind { kConv2d4, kConv2d8, kVggConv2d4, kVggConv2d8, kIdentity };

inline std::string_view to_string(FrontendKind k) {
  switch (k) {
    case FrontendKind::kConv2d4: return "conv2d4";
    case FrontendKind::kConv2d8: return "conv2d8";
    case FrontendKind::kVggConv2d4: return "vggconv2d4";
    case FrontendKind::kVggConv2d8: return "vggconv2d8";
    case FrontendKind::kIdentity: return "identity";
  }
  return "?";
}

inline FrontendKind parse_frontend_kind(std::string_view s) {
  for (auto k : {FrontendKind::kConv2d4, FrontendKind::kConv2d8, FrontendKind::kVggConv2d4,
                 FrontendKind::kVggConv2d8, FrontendKind::kIdentity}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown front-end kind '" + std::string(s) +
                    "' (expected conv2d4, conv2d8, vggconv2d4, vggconv2d8 or identity)");
}

inline bool is_vgg(FrontendKind k) { return k == FrontendKind::kVggConv2d4 || k == FrontendKind::kVggConv2d8; }

inline int stage_count(FrontendKind k) {
  switch (k) {
    case FrontendKind::kConv2d4:
    case FrontendKind::kVggConv2d4: return 2;
    case FrontendKind::kConv2d8:
    case FrontendKind::kVggConv2d8: return 3;
    case FrontendKind::kIdentity: return 0;
  }
  return 0;
}

inline std::int64_t reduction_factor(FrontendKind k) { return std::int64_t{1} << stage_count(k); }

// Length through one stage: valid 3x3 stride-2 conv, or same-padded convs
// followed by a 2x2 stride-2 pool.
inline std::int64_t stage_length(FrontendKind k, std::int64_t len) {
  return is_vgg(k) ? len / 2 : conv_output_size(len, 3, 2, 0);
}

/// Frames after the front-end; 0 when the input is too short.
inline std::int64_t output_length(FrontendKind k, std::int64_t T) {
  std::int64_t n = std::max<std::int64_t>(T, 0);
  for (int s = 0; s < stage_count(k) && n > 0; ++s) n = stage_length(k, n);
  return n;
}

inline std::int64_t minimum_input_length(FrontendKind k) {
  std::int64_t T = 1;
  while (output_length(k, T) < 1) ++T;
  return T;
}

struct FrontendConfig {
  FrontendKind kind = FrontendKind::kConv2d4;
  std::vector<std::int64_t> channels;  // empty: per-kind default
  std::int64_t feature_dim = 40;
  std::int64_t d_att = 256;
  std::optional<bool> positional_encoding;  // unset: on for conv/identity, off for VGG

  bool apply_positional_encoding() const { return positional_encoding.value_or(!is_vgg(kind)); }

  std::vector<std::int64_t> stage_channels() const {
    const int n = stage_count(kind);
    if (!channels.empty()) {
      if (static_cast<int>(channels.size()) != n) {
        throw ConfigError(std::string(to_string(kind)) + " needs " + std::to_string(n) +
                          " channel counts, got " + std::to_string(channels.size()));
      }
      return channels;
    }
    if (is_vgg(kind)) {
      std::vector<std::int64_t> c{64, 128, 256};
      c.resize(static_cast<std::size_t>(n));
      return c;
    }
    return std::vector<std::int64_t>(static_cast<std::size_t>(n), d_att);
  }

  // Frequency bins after all stages.
  std::int64_t output_bins() const {
    std::int64_t f = feature_dim;
    for (int s = 0; s < stage_count(kind); ++s) f = stage_length(kind, f);
    return f;
  }

  void validate() const {
    if (feature_dim < 1) throw ConfigError("feature dimension must be positive");
    if (d_att < 2 || d_att % 2 != 0) throw ConfigError("d_att must be even and positive");
    stage_channels();
    if (output_bins() < 1) {
      throw ConfigError("feature dimension " + std::to_string(feature_dim) + " too small for " +
                        std::string(to_string(kind)));
    }
  }
};

inline std::vector<ParameterSpec> frontend_parameter_specs(const FrontendConfig& cfg) {
  cfg.validate();
  std::vector<ParameterSpec> out;
  const auto ch = cfg.stage_channels();
  std::int64_t in_ch = 1, bins = cfg.feature_dim;
  for (std::size_t s = 0; s < ch.size(); ++s) {
    if (is_vgg(cfg.kind)) {
      const std::string p = "frontend.stage" + std::to_string(s);
      for (int j = 0; j < 2; ++j) {
        const std::string c = p + ".conv" + std::to_string(j);
        out.push_back({c + ".weight", {ch[s], j == 0 ? in_ch : ch[s], 3, 3}, InitKind::kXavierUniform});
        out.push_back({c + ".bias", {ch[s]}, InitKind::kZeros});
      }
      bins = stage_length(cfg.kind, bins);
      norm_spec(out, p + ".norm", ch[s] * bins);
    } else {
      const std::string c = "frontend.conv" + std::to_string(s);
      out.push_back({c + ".weight", {ch[s], in_ch, 3, 3}, InitKind::kXavierUniform});
      out.push_back({c + ".bias", {ch[s]}, InitKind::kZeros});
      bins = stage_length(cfg.kind, bins);
    }
    in_ch = ch[s];
  }
  linear_spec(out, "frontend.out", in_ch * bins, cfg.d_att);
  return out;
}

template <typename S>
struct SubsampleOutput {
  BasicTensor<S> x;                   // [B, n_sub, d_att]
  std::vector<std::int64_t> lengths;  // true n_sub per sequence
};

namespace detail {

// Zeroes frames at or past each length in a [B, C, T, F] activation.
template <typename S>
BasicTensor<S> mask_frames(const BasicTensor<S>& x, const std::vector<std::int64_t>& lengths) {
  const std::int64_t B = x.dim(0), T = x.dim(2);
  return mul(x, frame_keep_tensor<S>(lengths, T, {B, 1, T, 1}));
}

// [B, C, T, F] <-> [B, T, C*F]
template <typename S>
BasicTensor<S> frames_major(const BasicTensor<S>& x) {
  const std::int64_t B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {B, T, C * F});
}

}  // namespace detail

/// EncPre: x [B, T, F] with true lengths -> X_0 [B, n_sub, d_att].
template <typename S>
SubsampleOutput<S> subsample(const BasicTensor<S>& x, const std::vector<std::int64_t>& lengths,
                             const FrontendConfig& cfg, const ParameterStore<S>& params) {
  if (x.rank() != 3) throw DimensionError("front-end expects [B, T, F], got " + shape_str(x.shape()));
  const std::int64_t B = x.dim(0), T = x.dim(1), F = x.dim(2);
  if (F != cfg.feature_dim) {
    throw DimensionError("front-end configured for " + std::to_string(cfg.feature_dim) +
                         " bins, input has " + std::to_string(F));
  }
  if (static_cast<std::int64_t>(lengths.size()) != B) throw DimensionError("one length per sequence required");
  const std::int64_t need = minimum_input_length(cfg.kind);
  for (auto l : lengths) {
    if (l > T) throw DimensionError("sequence length " + std::to_string(l) + " exceeds padded " + std::to_string(T));
    if (l < need) {
      throw SequenceTooShortError(std::string(to_string(cfg.kind)) + " needs at least " + std::to_string(need) +
                                  " frames, got " + std::to_string(l));
    }
  }

  std::vector<std::int64_t> len = lengths;
  BasicTensor<S> h;
  if (cfg.kind == FrontendKind::kIdentity) {
    h = mul(x, frame_keep_tensor<S>(len, T, {B, T, 1}));
  } else {
    h = detail::mask_frames(reshape(x, {B, 1, T, F}), len);
    const auto ch = cfg.stage_channels();
    for (std::size_t s = 0; s < ch.size(); ++s) {
      if (is_vgg(cfg.kind)) {
        const std::string p = "frontend.stage" + std::to_string(s);
        // Same-padded convs see frames past the true length, so re-zero them.
        for (int j = 0; j < 2; ++j) {
          const std::string c = p + ".conv" + std::to_string(j);
          h = relu(conv2d(h, params.get(c + ".weight"), params.get(c + ".bias"), Conv2dOptions{1, 1, 1, 1}));
          h = detail::mask_frames(h, len);
        }
        h = max_pool2d(h, 2, 2);
        for (auto& l : len) l = stage_length(cfg.kind, l);
        const std::int64_t C = h.dim(1), Tn = h.dim(2), Fn = h.dim(3);
        auto n = NormWeights<S>::bind(params, p + ".norm")(detail::frames_major(h));
        h = detail::mask_frames(permute(reshape(n, {B, Tn, C, Fn}), {0, 2, 1, 3}), len);
      } else {
        const std::string c = "frontend.conv" + std::to_string(s);
        h = relu(conv2d(h, params.get(c + ".weight"), params.get(c + ".bias"), Conv2dOptions{2, 2, 0, 0}));
        for (auto& l : len) l = stage_length(cfg.kind, l);
      }
    }
    h = detail::frames_major(h);
  }
  auto y = LinearWeights<S>::bind(params, "frontend.out")(h);
  if (cfg.apply_positional_encoding()) y = add_positional_encoding(y);
  return {y, len};
}

/// Single unpadded sequence.
template <typename S>
SubsampleOutput<S> subsample(const FeatureSequence& seq, const FrontendConfig& cfg, const ParameterStore<S>& params) {
  std::vector<S> v(seq.values.begin(), seq.values.end());
  auto x = BasicTensor<S>::from_data({1, seq.frames, seq.dim}, std::move(v));
  return subsample(x, {seq.length}, cfg, params);
}

}  // namespace trasr
