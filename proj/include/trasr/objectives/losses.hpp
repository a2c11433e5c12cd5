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
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/ops.hpp"
#include "trasr/core/params.hpp"

namespace trasr {

namespace detail {

inline std::int64_t kept_rows(const std::vector<std::uint8_t>& keep) {
  std::int64_t n = 0;
  for (auto k : keep) n += k != 0;
  return n;
}

template <typename S>
std::vector<S> mean_row_weights(const std::vector<std::uint8_t>& keep, const char* what) {
  const auto n = kept_rows(keep);
  if (n == 0) throw Error(std::string(what) + ": every position is masked");
  std::vector<S> w(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) w[i] = keep[i] ? static_cast<S>(1.0 / static_cast<double>(n)) : S{0};
  return w;
}

}  // namespace detail

/// Cross-entropy of logits [..., V] against (1-eps) one-hot + eps/V, averaged
/// over kept positions. `targets` and `keep` have one entry per row.
template <typename S>
BasicTensor<S> ce_label_smoothed(const BasicTensor<S>& logits, const std::vector<std::int64_t>& targets,
                                 const std::vector<std::uint8_t>& keep, double epsilon) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw Error("label smoothing must be in [0, 1)");
  const std::int64_t V = logits.dim(-1), rows = logits.numel() / V;
  if (static_cast<std::int64_t>(targets.size()) != rows || static_cast<std::int64_t>(keep.size()) != rows) {
    throw DimensionError("one target and mask entry per position required");
  }
  const auto w = detail::mean_row_weights<S>(keep, "ce_label_smoothed");
  std::vector<S> q(static_cast<std::size_t>(rows * V), static_cast<S>(epsilon / static_cast<double>(V)));
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!keep[r]) continue;
    if (targets[r] < 0 || targets[r] >= V) throw Error("target id " + std::to_string(targets[r]) + " outside vocabulary");
    q[r * V + targets[r]] += static_cast<S>(1.0 - epsilon);
  }
  return soft_target_nll(log_softmax(logits, -1), q, w);
}

/// -sum_v softmax(teacher/tau) log_softmax(student/tau), averaged over kept
/// positions. The teacher side is a constant.
template <typename S>
BasicTensor<S> skd_loss(const BasicTensor<S>& teacher_logits, const BasicTensor<S>& student_logits,
                        const std::vector<std::uint8_t>& keep, double temperature = 1.0) {
  if (teacher_logits.shape() != student_logits.shape()) {
    throw DimensionError("teacher " + shape_str(teacher_logits.shape()) + " and student " +
                         shape_str(student_logits.shape()) + " logits differ in shape");
  }
  if (temperature <= 0.0) throw Error("distillation temperature must be positive");
  const std::int64_t V = student_logits.dim(-1), rows = student_logits.numel() / V;
  if (static_cast<std::int64_t>(keep.size()) != rows) throw DimensionError("one mask entry per position required");
  const auto w = detail::mean_row_weights<S>(keep, "skd_loss");
  const S inv_tau = static_cast<S>(1.0 / temperature);
  std::vector<S> q;
  {
    NoGradGuard guard;
    auto t = softmax(scale(teacher_logits.detach(), inv_tau), -1);
    q.assign(t.data().begin(), t.data().end());
  }
  auto s = temperature == 1.0 ? student_logits : scale(student_logits, inv_tau);
  return soft_target_nll(log_softmax(s, -1), q, w);
}

/// Mean entropy of softmax(logits/tau) over kept positions.
template <typename S>
double mean_entropy(const BasicTensor<S>& logits, const std::vector<std::uint8_t>& keep, double temperature = 1.0) {
  NoGradGuard guard;
  const std::int64_t V = logits.dim(-1), rows = logits.numel() / V;
  auto lp = log_softmax(scale(logits.detach(), static_cast<S>(1.0 / temperature)), -1);
  double h = 0.0;
  std::int64_t n = 0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!keep[r]) continue;
    ++n;
    for (std::int64_t v = 0; v < V; ++v) {
      const double l = lp.data()[r * V + v];
      h -= std::exp(l) * l;
    }
  }
  return n ? h / static_cast<double>(n) : 0.0;
}

inline double joint_loss(double l_ctc, double l_s2s, double alpha) {
  return (1.0 - alpha) * l_s2s + alpha * l_ctc;
}

inline double finetune_loss(double l_ctc, double l_s2s, double l_skd, double alpha, double phi) {
  return alpha * l_ctc + (1.0 - alpha) * (phi * l_skd + (1.0 - phi) * l_s2s);
}

template <typename S>
BasicTensor<S> joint_loss(const BasicTensor<S>& l_ctc, const BasicTensor<S>& l_s2s, double alpha) {
  // Zero-weight branches stay out of the graph so their parameters get no
  // gradient at all.
  if (alpha == 0.0) return l_s2s;
  if (alpha == 1.0) return l_ctc;
  return add(scale(l_s2s, static_cast<S>(1.0 - alpha)), scale(l_ctc, static_cast<S>(alpha)));
}

/// alpha*ctc + (1-alpha)*(phi*skd + (1-phi)*s2s). With phi == 0 this is the
/// joint loss itself and `l_skd` may be undefined.
template <typename S>
BasicTensor<S> finetune_loss(const BasicTensor<S>& l_ctc, const BasicTensor<S>& l_s2s, const BasicTensor<S>& l_skd,
                             double alpha, double phi) {
  if (phi == 0.0) return joint_loss(l_ctc, l_s2s, alpha);
  auto dec = phi == 1.0 ? l_skd : add(scale(l_skd, static_cast<S>(phi)), scale(l_s2s, static_cast<S>(1.0 - phi)));
  return joint_loss(l_ctc, dec, alpha);
}

struct LossBreakdown {
  double l_ctc = 0.0, l_s2s = 0.0, l_skd = 0.0, total = 0.0;
  double alpha = 0.0, phi_kd = 0.0;

  double recompute() const { return finetune_loss(l_ctc, l_s2s, l_skd, alpha, phi_kd); }
};

enum class PhiMode { kFixed, kLinear };

struct KDConfig {
  double phi_final = 0.5;
  int total_epochs = 1;
  PhiMode mode = PhiMode::kLinear;
  int teacher_snapshot_cadence = 1;  // epochs; 0 means every step
  bool freeze_teacher = false;       // keep the initial teacher for the whole run
  double temperature = 1.0;

  void validate() const {
    if (phi_final < 0.0 || phi_final > 1.0) throw ConfigError("kd.phi must be in [0, 1]");
    if (total_epochs < 1) throw ConfigError("kd total epochs must be at least 1");
    if (teacher_snapshot_cadence < 0) throw ConfigError("kd.cadence must be non-negative");
    if (temperature <= 0.0) throw ConfigError("kd.temperature must be positive");
  }
};

/// Distillation weight for epoch t in [1, T].
inline double phi_schedule(int t, const KDConfig& cfg) {
  if (t < 1 || t > cfg.total_epochs) {
    throw Error("epoch " + std::to_string(t) + " outside [1, " + std::to_string(cfg.total_epochs) + "]");
  }
  if (cfg.mode == PhiMode::kFixed) return cfg.phi_final;
  // t/T first, so t = T multiplies by exactly 1.
  return cfg.phi_final * (static_cast<double>(t) / static_cast<double>(cfg.total_epochs));
}

/// Frozen deep copy used as the teacher.
template <typename S>
ParameterStore<S> snapshot_teacher(const ParameterStore<S>& student) {
  return student.deep_copy(false);
}

}  // namespace trasr
