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
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/frontend/subsample.hpp"

namespace trasr {

struct ModelConfig {
  int e1 = 0;   // encoder layers before the time-reduction layer
  int e2 = 12;  // encoder layers after it
  int d = 6;    // decoder layers
  std::int64_t d_att = 256;
  std::int64_t d_ff = 2048;
  std::int64_t heads = 4;
  bool tr_enabled = false;
  bool pyramidal = false;
  bool pre_norm = true;
  std::int64_t vocab_size = 0;
  double dropout_rate = 0.1;
  FrontendConfig frontend;

  int encoder_layers() const { return e1 + e2; }

  FrontendConfig frontend_config() const {
    FrontendConfig f = frontend;
    f.d_att = d_att;
    return f;
  }

  // Encoder layer indices that are preceded by a time reduction. Index
  // encoder_layers() means "after the last layer".
  std::vector<int> reductions_before() const {
    if (pyramidal) return {1, 2, 3};
    if (tr_enabled) return {e1};
    return {};
  }

  void validate() const {
    if (e1 < 0 || e2 < 0) throw ConfigError("encoder layer counts must be non-negative");
    if (d < 0) throw ConfigError("decoder layer count must be non-negative");
    if (d_att < 2 || d_att % 2 != 0) throw ConfigError("d_att must be even and positive");
    if (heads < 1 || d_att % heads != 0) {
      throw ConfigError("d_att " + std::to_string(d_att) + " is not divisible by " + std::to_string(heads) + " heads");
    }
    if (d_ff < 1) throw ConfigError("d_ff must be positive");
    if (tr_enabled && pyramidal) throw ConfigError("time reduction and pyramidal encoder are mutually exclusive");
    if (pyramidal && encoder_layers() < 3) throw ConfigError("pyramidal encoder needs at least 3 layers");
    if (vocab_size < 5) throw ConfigError("vocabulary must include the 5 reserved symbols");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    frontend_config().validate();
  }
};

}  // namespace trasr
