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
#include <cstdint>
#include <filesystem>
#include <vector>

#include "trasr/core/binary_io.hpp"
#include "trasr/frontend/feature_sequence.hpp"

namespace trasr {

// "TRFT" | u32 version=1 | u32 T | u32 F | T*F f32, row-major, little-endian.
inline constexpr char kFeatureMagic[] = "TRFT";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::vector<char> encode_features(const FeatureSequence& x) {
  if (x.length < 1) throw Error("refusing to save a feature sequence with no frames");
  if (x.dim < 1) throw Error("refusing to save a feature sequence with no bins");
  io::ByteWriter w;
  w.bytes({kFeatureMagic, 4});
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(x.length));
  w.u32(static_cast<std::uint32_t>(x.dim));
  for (std::int64_t t = 0; t < x.length; ++t) {
    for (std::int64_t f = 0; f < x.dim; ++f) w.f32(x.at(t, f));
  }
  return w.buffer();
}

inline FeatureSequence decode_features(const std::vector<char>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (r.bytes(4, "magic") != std::string(kFeatureMagic, 4)) r.fail("bad feature-file magic");
  const auto version = r.u32("version");
  if (version != kFeatureVersion) r.fail("unsupported feature-file version " + std::to_string(version));
  const std::uint64_t T = r.u32("frame count"), F = r.u32("feature dimension");
  if (T == 0 || F == 0) r.fail("empty feature matrix");
  if (r.remaining() != T * F * 4) {
    r.fail(r.remaining() < T * F * 4 ? "truncated feature values" : "trailing bytes after feature values");
  }
  std::vector<float> v(static_cast<std::size_t>(T * F));
  for (auto& e : v) {
    e = r.f32("value");
    if (!std::isfinite(e)) r.fail("non-finite feature value");
  }
  return FeatureSequence(static_cast<std::int64_t>(T), static_cast<std::int64_t>(F), std::move(v));
}

inline void save_features(const std::filesystem::path& path, const FeatureSequence& x) {
  io::write_file_atomic(path, encode_features(x));
}

inline FeatureSequence load_features(const std::filesystem::path& path) {
  return decode_features(io::read_file(path), path.string());
}

}  // namespace trasr
