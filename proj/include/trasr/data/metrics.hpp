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
#include <sstream>
#include <string>
#include <vector>

#include "trasr/data/utf8.hpp"

namespace trasr {

struct EditCounts {
  std::int64_t substitutions = 0, insertions = 0, deletions = 0;
  std::int64_t reference_length = 0;

  std::int64_t errors() const { return substitutions + insertions + deletions; }
  double rate() const { return static_cast<double>(errors()) / static_cast<double>(std::max<std::int64_t>(1, reference_length)); }

  EditCounts& operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    reference_length += o.reference_length;
    return *this;
  }
};

/// Unit-cost Levenshtein alignment with S/I/D breakdown.
template <typename T>
EditCounts edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::int64_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::int64_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1, at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
    }
  }
  EditCounts c;
  c.reference_length = static_cast<std::int64_t>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      c.substitutions += ref[i - 1] == hyp[j - 1] ? 0 : 1;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> w;
  for (std::string t; in >> t;) w.push_back(t);
  return w;
}

inline EditCounts word_errors(const std::string& ref, const std::string& hyp) {
  return edit_distance(split_words(ref), split_words(hyp));
}

/// Character errors, ignoring spaces.
inline EditCounts char_errors(const std::string& ref, const std::string& hyp) {
  auto chars = [](const std::string& s) {
    auto cps = utf8::decode(s);
    cps.erase(std::remove(cps.begin(), cps.end(), U' '), cps.end());
    return cps;
  };
  return edit_distance(chars(ref), chars(hyp));
}

}  // namespace trasr
