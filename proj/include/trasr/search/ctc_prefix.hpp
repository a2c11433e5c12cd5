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
#include <limits>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/objectives/ctc.hpp"

namespace trasr {

/// Per-frame forward variables of one prefix: r_n[t] (ending in its last
/// label) and r_b[t] (ending in blank), plus the prefix log-probability psi.
struct CtcPrefixState {
  std::vector<double> r_n, r_b;
  double psi = 0.0;
  std::int64_t last = -1;  // last label, -1 for the empty prefix
};

/// Incremental CTC prefix scoring over fixed log-probabilities [T, V].
class CtcPrefixScorer {
 public:
  CtcPrefixScorer(std::vector<double> log_probs, std::int64_t frames, std::int64_t vocab, std::int64_t blank)
      : lp_(std::move(log_probs)), T_(frames), V_(vocab), blank_(blank) {
    if (static_cast<std::int64_t>(lp_.size()) != T_ * V_) throw DimensionError("CTC scorer needs [T, V] values");
    if (T_ < 1) throw DimensionError("CTC scorer needs at least one frame");
  }

  std::int64_t frames() const { return T_; }
  std::int64_t vocab() const { return V_; }
  std::int64_t blank() const { return blank_; }

  CtcPrefixState initial() const {
    CtcPrefixState s;
    s.r_n.assign(static_cast<std::size_t>(T_), kNegInf);
    s.r_b.resize(static_cast<std::size_t>(T_));
    double acc = 0.0;
    for (std::int64_t t = 0; t < T_; ++t) s.r_b[t] = acc += lp(t, blank_);
    s.psi = 0.0;
    return s;
  }

  /// State of prefix g + c. psi is log P(CTC output starts with g + c).
  CtcPrefixState extend(const CtcPrefixState& g, std::int64_t c) const {
    if (c == blank_ || c < 0 || c >= V_) throw Error("cannot extend a CTC prefix with id " + std::to_string(c));
    CtcPrefixState h;
    h.last = c;
    h.r_n.assign(static_cast<std::size_t>(T_), kNegInf);
    h.r_b.assign(static_cast<std::size_t>(T_), kNegInf);
    // Mass of g that may be followed by c at the next frame.
    auto phi = [&](std::int64_t t) { return c == g.last ? g.r_b[t] : log_add(g.r_n[t], g.r_b[t]); };
    if (g.last < 0) h.r_n[0] = lp(0, c);
    double psi = h.r_n[0];
    for (std::int64_t t = 1; t < T_; ++t) {
      const double ph = phi(t - 1);
      h.r_n[t] = log_add(h.r_n[t - 1], ph) + lp(t, c);
      h.r_b[t] = log_add(h.r_n[t - 1], h.r_b[t - 1]) + lp(t, blank_);
      psi = log_add(psi, ph + lp(t, c));
    }
    h.psi = psi;
    return h;
  }

  /// log P(CTC output equals the prefix exactly): the eos score.
  double final_score(const CtcPrefixState& s) const { return log_add(s.r_n[T_ - 1], s.r_b[T_ - 1]); }

  CtcPrefixState state_for(const std::vector<std::int64_t>& labels) const {
    auto s = initial();
    for (auto c : labels) s = extend(s, c);
    return s;
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double lp(std::int64_t t, std::int64_t k) const { return lp_[static_cast<std::size_t>(t * V_ + k)]; }

  std::vector<double> lp_;
  std::int64_t T_, V_, blank_;
};

}  // namespace trasr
