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
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trasr/core/binary_io.hpp"
#include "trasr/core/error.hpp"
#include "trasr/data/utf8.hpp"

namespace trasr {

/// Character vocabulary with five reserved ids.
class Vocabulary {
 public:
  static constexpr std::int64_t kBlank = 0, kUnk = 1, kSos = 2, kEos = 3, kPad = 4;
  static constexpr std::int64_t kReserved = 5;
  static constexpr char32_t kReplacement = 0xfffd;

  Vocabulary() = default;

  explicit Vocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      if (chars_[i] == '\n' || chars_[i] == '\t' || chars_[i] == '\r') {
        throw Error("vocabulary cannot hold tab or newline characters");
      }
      if (!index_.emplace(chars_[i], kReserved + static_cast<std::int64_t>(i)).second) {
        throw Error("duplicate vocabulary character");
      }
    }
  }

  /// Sorted distinct characters of `texts`.
  static Vocabulary from_texts(const std::vector<std::string>& texts) {
    std::set<char32_t> seen;
    for (const auto& t : texts) {
      for (auto c : utf8::decode(t)) seen.insert(c);
    }
    return Vocabulary(std::vector<char32_t>(seen.begin(), seen.end()));
  }

  std::int64_t size() const { return kReserved + static_cast<std::int64_t>(chars_.size()); }
  const std::vector<char32_t>& characters() const { return chars_; }

  std::vector<std::int64_t> tokenize(std::string_view text) const {
    std::vector<std::int64_t> ids;
    for (auto c : utf8::decode(text)) {
      auto it = index_.find(c);
      ids.push_back(it == index_.end() ? kUnk : it->second);
    }
    return ids;
  }

  /// Specials are dropped; unk renders as U+FFFD.
  std::string detokenize(const std::vector<std::int64_t>& ids) const {
    std::string out;
    for (auto id : ids) {
      if (id < 0 || id >= size()) throw Error("token id " + std::to_string(id) + " outside vocabulary");
      if (id == kUnk) {
        utf8::append(out, kReplacement);
      } else if (id >= kReserved) {
        utf8::append(out, chars_[static_cast<std::size_t>(id - kReserved)]);
      }
    }
    return out;
  }

  /// One character per line after the reserved header lines.
  std::string serialize() const {
    std::string s = "<blank>\n<unk>\n<sos>\n<eos>\n<pad>\n";
    for (auto c : chars_) {
      utf8::append(s, c);
      s += '\n';
    }
    return s;
  }

  static Vocabulary parse(const std::string& text, const std::string& source) {
    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
      if (ch == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) throw FormatError(source, text.size(), "vocabulary must end with a newline");
    static const char* kHeader[] = {"<blank>", "<unk>", "<sos>", "<eos>", "<pad>"};
    if (lines.size() < kReserved) throw FormatError(source, 0, "vocabulary lacks the reserved symbols");
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < kReserved; ++i) {
      if (lines[i] != kHeader[i]) throw FormatError(source, offset, "expected reserved symbol " + std::string(kHeader[i]));
      offset += lines[i].size() + 1;
    }
    std::vector<char32_t> chars;
    for (std::size_t i = kReserved; i < lines.size(); ++i) {
      std::vector<char32_t> cps;
      try {
        cps = utf8::decode(lines[i]);
      } catch (const Error& e) {
        throw FormatError(source, offset, e.what());
      }
      if (cps.size() != 1) throw FormatError(source, offset, "each vocabulary line must hold one character");
      chars.push_back(cps[0]);
      offset += lines[i].size() + 1;
    }
    try {
      return Vocabulary(std::move(chars));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(source, 0, e.what());
    }
  }

  void save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

  static Vocabulary load(const std::filesystem::path& path) {
    auto bytes = io::read_file(path);
    return parse(std::string(bytes.begin(), bytes.end()), path.string());
  }

  bool operator==(const Vocabulary& o) const { return chars_ == o.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, std::int64_t> index_;
};

}  // namespace trasr
