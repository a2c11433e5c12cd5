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
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "trasr/core/binary_io.hpp"
#include "trasr/core/error.hpp"
#include "trasr/core/params.hpp"

namespace trasr {

// On-disk layout (little-endian):
//   "TRCK" | u32 version=1 | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 values
inline constexpr char kCheckpointMagic[] = "TRCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kMaxCheckpointRank = 8;

struct CheckpointEntry {
  Shape shape;
  std::vector<float> values;
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

template <typename S>
Checkpoint to_checkpoint(const ParameterStore<S>& params) {
  Checkpoint ck;
  for (const auto& [name, t] : params) {
    ck[name] = CheckpointEntry{t.shape(), std::vector<float>(t.data().begin(), t.data().end())};
  }
  return ck;
}

inline std::vector<char> encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ck.size()));
  for (const auto& [name, e] : ck) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("parameter name too long: " + name.substr(0, 40) + "...");
    }
    if (e.shape.size() > kMaxCheckpointRank) throw Error("rank too large for '" + name + "'");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.values) w.f32(v);
  }
  return w.buffer();
}

inline Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (r.bytes(4, "magic") != std::string(kCheckpointMagic, 4)) r.fail("bad checkpoint magic");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u32("entry count");
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u16("name length");
    std::string name = r.bytes(len, "name");
    if (name.empty()) r.fail("empty parameter name");
    if (ck.count(name)) r.fail("duplicate parameter '" + name + "'");
    const auto rank = r.u8("rank");
    if (rank > kMaxCheckpointRank) r.fail("rank " + std::to_string(rank) + " too large");
    CheckpointEntry e;
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.u32("dimension");
      e.shape.push_back(dim);
      numel *= dim;
      if (numel > r.remaining() / 4 + 1) r.fail("tensor '" + name + "' larger than file");
    }
    r.need(numel * 4, "tensor values");
    e.values.resize(static_cast<std::size_t>(numel));
    for (auto& v : e.values) {
      v = r.f32("value");
      if (!std::isfinite(v)) r.fail("non-finite value in '" + name + "'");
    }
    ck.emplace(std::move(name), std::move(e));
  }
  if (!r.at_end()) r.fail("trailing bytes after last entry");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file_atomic(path, encode_checkpoint(ck));
}

template <typename S>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<S>& params) {
  save_checkpoint(path, to_checkpoint(params));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

template <typename S>
ParameterStore<S> to_parameter_store(const Checkpoint& ck, bool trainable = true) {
  ParameterStore<S> store(trainable);
  for (const auto& [name, e] : ck) {
    store.add(name, BasicTensor<S>::from_data(e.shape, std::vector<S>(e.values.begin(), e.values.end())));
  }
  return store;
}

/// Element-wise mean of checkpoints with identical names and shapes.
inline Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks) {
  if (cks.empty()) throw Error("no checkpoints to average");
  Checkpoint out = cks.front();
  for (std::size_t k = 1; k < cks.size(); ++k) {
    if (cks[k].size() != out.size()) throw ArchitectureMismatchError("checkpoint parameter counts differ");
    for (const auto& [name, e] : cks[k]) {
      auto it = out.find(name);
      if (it == out.end()) throw ArchitectureMismatchError("parameter '" + name + "' missing from first checkpoint");
      if (it->second.shape != e.shape) {
        throw ArchitectureMismatchError("shape mismatch for '" + name + "': " + shape_str(it->second.shape) +
                                        " vs " + shape_str(e.shape));
      }
    }
  }
  if (cks.size() == 1) return out;
  // Accumulate in double so the mean of identical inputs is exact.
  for (auto& [name, e] : out) {
    std::vector<double> acc(e.values.size(), 0.0);
    for (const auto& ck : cks) {
      const auto& v = ck.at(name).values;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
      e.values[i] = static_cast<float>(acc[i] / static_cast<double>(cks.size()));
    }
  }
  return out;
}

}  // namespace trasr
