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

#include <exception>
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/rng.hpp"

namespace trasr::testing {

// One random edit: bit flip, truncation, byte insertion or byte overwrite.
inline std::vector<char> mutate(std::vector<char> b, Rng& rng) {
  switch (rng.uniform_int(0, 3)) {
    case 0:
      if (!b.empty()) b[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(b.size()) - 1))] ^= static_cast<char>(1 << rng.uniform_int(0, 7));
      break;
    case 1:
      b.resize(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(b.size()))));
      break;
    case 2:
      b.insert(b.begin() + rng.uniform_int(0, static_cast<std::int64_t>(b.size())), static_cast<char>(rng.uniform_int(0, 255)));
      break;
    default:
      if (!b.empty()) b[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(b.size()) - 1))] = static_cast<char>(rng.uniform_int(0, 255));
  }
  return b;
}

struct FuzzOutcome {
  int accepted = 0;
  int rejected = 0;                  // threw trasr::Error
  std::vector<std::string> escaped;  // anything else
};

// Runs `parse` on `n` independent mutations of `good`.
template <typename Parse>
FuzzOutcome fuzz_format(const std::vector<char>& good, Parse parse, std::uint64_t seed, int n = 1000) {
  Rng rng(seed);
  FuzzOutcome out;
  for (int i = 0; i < n; ++i) {
    auto bad = mutate(good, rng);
    try {
      parse(bad);
      ++out.accepted;
    } catch (const Error&) {
      ++out.rejected;
    } catch (const std::exception& e) {
      out.escaped.push_back("mutation " + std::to_string(i) + ": " + e.what());
    } catch (...) {
      out.escaped.push_back("mutation " + std::to_string(i) + ": unknown exception");
    }
  }
  return out;
}

}  // namespace trasr::testing
