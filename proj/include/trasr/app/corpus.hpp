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

#include <filesystem>
#include <string>
#include <vector>

#include "trasr/data/features.hpp"
#include "trasr/data/manifest.hpp"
#include "trasr/data/vocab.hpp"
#include "trasr/model/encoder.hpp"
#include "trasr/objectives/ctc.hpp"

namespace trasr {

/// A manifest with its features loaded and transcripts tokenized.
struct Corpus {
  std::vector<ManifestEntry> entries;
  std::vector<FeatureSequence> features;
  std::vector<std::vector<std::int64_t>> targets;

  std::size_t size() const { return entries.size(); }

  std::vector<std::int64_t> frame_lengths() const {
    std::vector<std::int64_t> out;
    for (const auto& f : features) out.push_back(f.length);
    return out;
  }
};

inline Corpus load_corpus(const std::filesystem::path& manifest, const Vocabulary& vocab) {
  if (manifest.empty()) throw ConfigError("no manifest path configured");
  Corpus c;
  c.entries = load_manifest(manifest);
  if (c.entries.empty()) throw Error("manifest " + manifest.string() + " is empty");
  for (const auto& e : c.entries) {
    c.features.push_back(load_features(e.feature_path));
    c.targets.push_back(vocab.tokenize(e.transcript));
  }
  return c;
}

/// Fails early, naming the utterance, when the encoder output is too short
/// for a CTC alignment or the feature dimension disagrees with the model.
inline void check_corpus_fits(const Corpus& c, const ModelConfig& cfg) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& id = c.entries[i].id;
    if (c.features[i].dim != cfg.frontend.feature_dim) {
      throw ConfigError("utterance " + id + " has " + std::to_string(c.features[i].dim) +
                        " feature bins, model expects " + std::to_string(cfg.frontend.feature_dim));
    }
    const auto frames = encoder_output_length(cfg, c.features[i].length);
    const auto need = ctc_min_frames(c.targets[i]);
    if (frames < std::max<std::int64_t>(need, 1)) {
      throw Error("utterance " + id + ": " + std::to_string(c.features[i].length) + " input frames give " +
                  std::to_string(frames) + " encoder frames, CTC needs " + std::to_string(need));
    }
  }
}

}  // namespace trasr
