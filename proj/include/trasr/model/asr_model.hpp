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
#include <set>
#include <string>
#include <vector>

#include "trasr/core/checkpoint.hpp"
#include "trasr/model/decoder.hpp"
#include "trasr/model/encoder.hpp"

namespace trasr {

inline std::vector<ParameterSpec> model_parameter_specs(const ModelConfig& cfg) {
  cfg.validate();
  auto out = encoder_parameter_specs(cfg);
  for (auto& s : decoder_parameter_specs(cfg)) out.push_back(std::move(s));
  linear_spec(out, "ctc.out", cfg.d_att, cfg.vocab_size);
  return out;
}

template <typename S>
ParameterStore<S> init_model_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterStore<S> p;
  add_parameters(p, model_parameter_specs(cfg), Rng(seed).derive("model"));
  return p;
}

/// Throws ArchitectureMismatchError listing missing, extra and reshaped
/// parameters.
inline void check_architecture(const Checkpoint& ck, const std::vector<ParameterSpec>& specs) {
  std::set<std::string> expected;
  std::vector<std::string> missing, extra, reshaped;
  for (const auto& s : specs) {
    expected.insert(s.name);
    auto it = ck.find(s.name);
    if (it == ck.end()) {
      missing.push_back(s.name);
    } else if (it->second.shape != s.shape) {
      reshaped.push_back(s.name + " " + shape_str(it->second.shape) + " vs " + shape_str(s.shape));
    }
  }
  for (const auto& [name, e] : ck) {
    if (!expected.count(name)) extra.push_back(name);
  }
  if (missing.empty() && extra.empty() && reshaped.empty()) return;
  std::string msg = "checkpoint does not match the model configuration";
  auto list = [&msg](const char* what, const std::vector<std::string>& names) {
    if (names.empty()) return;
    msg += std::string("; ") + what + ":";
    for (const auto& n : names) msg += " " + n;
  };
  list("missing", missing);
  list("extra", extra);
  list("shape mismatch", reshaped);
  throw ArchitectureMismatchError(msg);
}

template <typename S>
ParameterStore<S> load_model_parameters(const Checkpoint& ck, const ModelConfig& cfg, bool trainable = true) {
  check_architecture(ck, model_parameter_specs(cfg));
  return to_parameter_store<S>(ck, trainable);
}

/// CTC branch: log-softmax of a linear map of X_e, [B, n, V].
template <typename S>
BasicTensor<S> ctc_log_probs(const BasicTensor<S>& encoded, const ParameterStore<S>& params) {
  return log_softmax(LinearWeights<S>::bind(params, "ctc.out")(encoded), -1);
}

}  // namespace trasr
