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
#include <set>
#include <string>
#include <vector>

#include "trasr/core/binary_io.hpp"
#include "trasr/core/error.hpp"

namespace trasr {

struct ManifestEntry {
  std::string id;
  std::filesystem::path feature_path;  // resolved against the manifest directory
  std::string transcript;
};

/// UTF-8 TSV `id<TAB>path<TAB>transcript`, no header. Relative paths are
/// taken from the manifest's own directory.
inline std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& source,
                                                 bool check_files = true) {
  std::vector<ManifestEntry> out;
  std::set<std::string> ids;
  const auto base = source.parent_path();
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    const std::uint64_t offset = pos;
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw FormatError(source.string(), offset, "line " + std::to_string(line_no) + " needs exactly 3 tab-separated fields");
    }
    ManifestEntry e{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)};
    if (e.id.empty()) throw FormatError(source.string(), offset, "empty utterance id");
    if (e.feature_path.empty()) throw FormatError(source.string(), offset, "empty feature path");
    if (!ids.insert(e.id).second) throw FormatError(source.string(), offset, "duplicate utterance id '" + e.id + "'");
    if (e.feature_path.is_relative()) e.feature_path = base / e.feature_path;
    if (check_files && !std::filesystem::exists(e.feature_path)) {
      throw IoError("manifest " + source.string() + ": feature file '" + e.feature_path.string() + "' not found");
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path, bool check_files = true) {
  auto bytes = io::read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path, check_files);
}

/// Writes paths relative to the manifest directory where possible.
inline void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string s;
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& e : entries) {
    if (e.id.find_first_of("\t\n") != std::string::npos || e.transcript.find_first_of("\t\n") != std::string::npos) {
      throw Error("manifest fields cannot contain tabs or newlines");
    }
    auto p = e.feature_path;
    if (p.is_absolute()) p = std::filesystem::relative(p, base);
    s += e.id + "\t" + p.generic_string() + "\t" + e.transcript + "\n";
  }
  io::write_file_atomic(path, s);
}

}  // namespace trasr
