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
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/tensor.hpp"

namespace trasr {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Frames CTC needs for `target`: one per label plus a blank between repeats.
inline std::int64_t ctc_min_frames(const std::vector<std::int64_t>& target) {
  std::int64_t n = static_cast<std::int64_t>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1];
  return n;
}

struct CtcResult {
  double nll = 0.0;
  std::vector<double> grad;  // d nll / d log_probs, [T, V]
};

/// Exact forward-backward over the blank-interleaved lattice, in double.
/// `log_probs` is row-major [T, V].
template <typename S>
CtcResult ctc_forward_backward(const S* log_probs, std::int64_t T, std::int64_t V,
                               const std::vector<std::int64_t>& target, std::int64_t blank) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (auto c : target) {
    if (c < 0 || c >= V || c == blank) throw Error("CTC target id " + std::to_string(c) + " invalid");
  }
  if (T < ctc_min_frames(target)) {
    throw InfeasibleAlignmentError("CTC target of " + std::to_string(target.size()) + " labels needs " +
                                   std::to_string(ctc_min_frames(target)) + " frames, got " + std::to_string(T));
  }
  const std::int64_t L = 2 * static_cast<std::int64_t>(target.size()) + 1;
  auto label = [&](std::int64_t s) { return s % 2 == 0 ? blank : target[static_cast<std::size_t>(s / 2)]; };
  auto lp = [&](std::int64_t t, std::int64_t k) { return static_cast<double>(log_probs[t * V + k]); };
  // Skip transition s-2 -> s allowed for non-blank labels that differ from s-2.
  auto can_skip = [&](std::int64_t s) { return s >= 2 && s % 2 == 1 && label(s) != label(s - 2); };

  std::vector<double> alpha(static_cast<std::size_t>(T * L), kNegInf), beta(alpha.size(), kNegInf);
  alpha[0] = lp(0, blank);
  if (L > 1) alpha[1] = lp(0, label(1));
  for (std::int64_t t = 1; t < T; ++t) {
    for (std::int64_t s = 0; s < L; ++s) {
      double a = alpha[(t - 1) * L + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * L + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * L + s - 2]);
      alpha[t * L + s] = a == kNegInf ? kNegInf : a + lp(t, label(s));
    }
  }
  // beta excludes the emission at its own frame.
  beta[(T - 1) * L + L - 1] = 0.0;
  if (L > 1) beta[(T - 1) * L + L - 2] = 0.0;
  for (std::int64_t t = T - 2; t >= 0; --t) {
    for (std::int64_t s = 0; s < L; ++s) {
      double b = beta[(t + 1) * L + s] + lp(t + 1, label(s));
      if (s + 1 < L) b = log_add(b, beta[(t + 1) * L + s + 1] + lp(t + 1, label(s + 1)));
      if (s + 2 < L && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * L + s + 2] + lp(t + 1, label(s + 2)));
      beta[t * L + s] = b;
    }
  }
  double logp = alpha[(T - 1) * L + L - 1];
  if (L > 1) logp = log_add(logp, alpha[(T - 1) * L + L - 2]);
  if (!std::isfinite(logp)) throw InfeasibleAlignmentError("CTC target has zero probability under these frames");

  CtcResult r;
  r.nll = -logp;
  r.grad.assign(static_cast<std::size_t>(T * V), 0.0);
  std::vector<double> acc(static_cast<std::size_t>(V));
  for (std::int64_t t = 0; t < T; ++t) {
    std::fill(acc.begin(), acc.end(), kNegInf);
    for (std::int64_t s = 0; s < L; ++s) {
      const auto k = static_cast<std::size_t>(label(s));
      acc[k] = log_add(acc[k], alpha[t * L + s] + beta[t * L + s]);
    }
    for (std::int64_t k = 0; k < V; ++k) {
      if (acc[k] != kNegInf) r.grad[t * V + k] = -std::exp(acc[k] - logp);
    }
  }
  return r;
}

/// -log P_ctc(target | log_probs) for one utterance, log_probs [T, V].
template <typename S>
BasicTensor<S> ctc_loss(const BasicTensor<S>& log_probs, const std::vector<std::int64_t>& target,
                        std::int64_t blank = 0) {
  if (log_probs.rank() != 2) throw DimensionError("ctc_loss expects [T, V], got " + shape_str(log_probs.shape()));
  auto r = ctc_forward_backward(log_probs.data().data(), log_probs.dim(0), log_probs.dim(1), target, blank);
  return make_result<S>({}, {static_cast<S>(r.nll)}, {log_probs.node_ptr()},
                        [g = std::move(r.grad)](TensorNode<S>& self) {
                          auto& dst = grad_buffer(*self.inputs[0]);
                          const S up = self.grad[0];
                          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += up * static_cast<S>(g[i]);
                        });
}

struct BatchCtc {
  double total_nll = 0.0;       // summed over utterances
  std::int64_t target_tokens = 0;
};

/// Batched CTC over log_probs [B, T, V]: summed NLL divided by the total
/// number of target tokens.
template <typename S>
BasicTensor<S> ctc_loss(const BasicTensor<S>& log_probs, const std::vector<std::int64_t>& lengths,
                        const std::vector<std::vector<std::int64_t>>& targets, std::int64_t blank = 0,
                        BatchCtc* stats = nullptr) {
  if (log_probs.rank() != 3) throw DimensionError("batched ctc_loss expects [B, T, V]");
  const std::int64_t B = log_probs.dim(0), T = log_probs.dim(1), V = log_probs.dim(2);
  if (static_cast<std::int64_t>(lengths.size()) != B || static_cast<std::int64_t>(targets.size()) != B) {
    throw DimensionError("one length and target per sequence required");
  }
  std::int64_t tokens = 0;
  for (const auto& t : targets) tokens += static_cast<std::int64_t>(t.size());
  const double norm = static_cast<double>(std::max<std::int64_t>(tokens, 1));
  std::vector<double> grad(static_cast<std::size_t>(B * T * V), 0.0);
  double total = 0.0;
  for (std::int64_t b = 0; b < B; ++b) {
    if (lengths[b] < 1 || lengths[b] > T) throw DimensionError("CTC length out of range");
    auto r = ctc_forward_backward(log_probs.data().data() + b * T * V, lengths[b], V, targets[b], blank);
    total += r.nll;
    for (std::size_t i = 0; i < r.grad.size(); ++i) grad[b * T * V + i] = r.grad[i] / norm;
  }
  if (stats) *stats = {total, tokens};
  return make_result<S>({}, {static_cast<S>(total / norm)}, {log_probs.node_ptr()},
                        [g = std::move(grad)](TensorNode<S>& self) {
                          auto& dst = grad_buffer(*self.inputs[0]);
                          const S up = self.grad[0];
                          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += up * static_cast<S>(g[i]);
                        });
}

}  // namespace trasr
