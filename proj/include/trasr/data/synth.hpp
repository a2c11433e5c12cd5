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
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trasr/core/rng.hpp"
#include "trasr/data/features.hpp"
#include "trasr/data/manifest.hpp"
#include "trasr/data/vocab.hpp"

namespace trasr {

struct SyntheticTaskSpec {
  std::string alphabet = "abcdefgh ";  // token inventory; a space separates words
  std::int64_t min_frames_per_token = 4;
  std::int64_t max_frames_per_token = 8;
  std::int64_t feature_dim = 40;
  std::uint64_t template_seed = 1;
  double noise_stddev = 0.1;
  double min_template_distance = 2.0;

  std::vector<char32_t> symbols() const { return utf8::decode(alphabet); }

  void validate() const {
    const auto s = symbols();
    Vocabulary check(s);  // rejects duplicates and control separators
    std::int64_t letters = 0;
    for (auto c : s) letters += c != U' ';
    if (letters < 2) throw ConfigError("synthetic alphabet needs at least two non-space symbols");
    if (min_frames_per_token < 1 || max_frames_per_token < min_frames_per_token) {
      throw ConfigError("frames per token must satisfy 1 <= min <= max");
    }
    if (feature_dim < 1) throw ConfigError("feature dimension must be positive");
    if (!(noise_stddev >= 0.0)) throw ConfigError("noise stddev must be non-negative");
    if (min_template_distance < 0.0) throw ConfigError("template distance must be non-negative");
  }
};

/// One constant feature vector per symbol, rejection-sampled until every pair
/// is at least `min_template_distance` apart in L2.
inline std::vector<std::vector<float>> synth_templates(const SyntheticTaskSpec& spec) {
  spec.validate();
  const auto n = spec.symbols().size();
  const auto F = static_cast<std::size_t>(spec.feature_dim);
  Rng rng = Rng(spec.template_seed).derive("templates");
  std::vector<std::vector<float>> out;
  int attempts = 0;
  while (out.size() < n) {
    if (++attempts > 100000) throw ConfigError("cannot place templates at the requested minimum distance");
    std::vector<float> t(F);
    for (auto& v : t) v = static_cast<float>(rng.normal());
    bool ok = true;
    for (const auto& o : out) {
      double d = 0;
      for (std::size_t f = 0; f < F; ++f) d += (t[f] - o[f]) * (t[f] - o[f]);
      ok = ok && std::sqrt(d) >= spec.min_template_distance;
    }
    if (ok) out.push_back(std::move(t));
  }
  return out;
}

struct SyntheticUtterance {
  std::string transcript;
  std::vector<std::size_t> symbols;        // index into the alphabet
  std::vector<std::int64_t> frame_labels;  // symbol index per frame
  FeatureSequence features;
};

/// A random string of `k` tokens. Adjacent tokens always differ and spaces
/// never lead or trail, so every transcript is a clean word sequence.
inline SyntheticUtterance synth_utterance(const SyntheticTaskSpec& spec,
                                          const std::vector<std::vector<float>>& templates, std::int64_t k,
                                          Rng& rng) {
  const auto syms = spec.symbols();
  const auto n = static_cast<std::int64_t>(syms.size());
  SyntheticUtterance u;
  for (std::int64_t i = 0; i < k; ++i) {
    std::size_t s;
    do {
      s = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    } while ((!u.symbols.empty() && s == u.symbols.back()) || (syms[s] == U' ' && (i == 0 || i == k - 1)));
    u.symbols.push_back(s);
    utf8::append(u.transcript, syms[s]);
  }
  const auto F = spec.feature_dim;
  std::vector<float> values;
  for (auto s : u.symbols) {
    const auto r = rng.uniform_int(spec.min_frames_per_token, spec.max_frames_per_token);
    for (std::int64_t t = 0; t < r; ++t) {
      u.frame_labels.push_back(static_cast<std::int64_t>(s));
      for (std::int64_t f = 0; f < F; ++f) {
        const double noise = spec.noise_stddev > 0 ? spec.noise_stddev * rng.normal() : 0.0;
        values.push_back(static_cast<float>(templates[s][static_cast<std::size_t>(f)] + noise));
      }
    }
  }
  const auto T = static_cast<std::int64_t>(u.frame_labels.size());
  u.features = FeatureSequence(T, F, std::move(values));
  return u;
}

struct SyntheticDataset {
  std::filesystem::path manifest;
  std::filesystem::path vocabulary;
  std::vector<ManifestEntry> entries;
};

/// Writes `<dir>/feats/<id>.trft`, `<dir>/<name>.tsv` and `<dir>/vocab.txt`.
/// Utterance i draws only from `Rng(seed).derive(i)`.
inline SyntheticDataset synth_generate(const SyntheticTaskSpec& spec, std::int64_t n_utterances,
                                       std::int64_t min_tokens, std::int64_t max_tokens, std::uint64_t seed,
                                       const std::filesystem::path& dir, const std::string& name = "train") {
  spec.validate();
  if (n_utterances < 1) throw ConfigError("need at least one utterance");
  if (min_tokens < 1 || max_tokens < min_tokens) throw ConfigError("token count range must satisfy 1 <= min <= max");
  const auto templates = synth_templates(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir / "feats", ec);
  if (ec) throw IoError("cannot create " + (dir / "feats").string() + ": " + ec.message());
  SyntheticDataset ds{dir / (name + ".tsv"), dir / "vocab.txt", {}};
  const Rng root = Rng(seed).derive("synth/" + name);
  for (std::int64_t i = 0; i < n_utterances; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    const auto k = rng.uniform_int(min_tokens, max_tokens);
    auto u = synth_utterance(spec, templates, k, rng);
    char id[32];
    std::snprintf(id, sizeof id, "%s%05lld", name.c_str(), static_cast<long long>(i));
    const auto rel = std::filesystem::path("feats") / (std::string(id) + ".trft");
    save_features(dir / rel, u.features);
    ds.entries.push_back({id, rel, u.transcript});
  }
  save_manifest(ds.manifest, ds.entries);
  Vocabulary(spec.symbols()).save(ds.vocabulary);
  for (auto& e : ds.entries) e.feature_path = dir / e.feature_path;
  return ds;
}

}  // namespace trasr
