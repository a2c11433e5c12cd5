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
#include <map>
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/params.hpp"

namespace trasr {

/// Learning rate as a function of the 1-based step being taken.
///
/// Noam form: scale * d_att^-1/2 * min(s^-1/2, s * warmup^-3/2).
/// Constant form: `constant_rate` for every step.
struct LearningRateSchedule {
  enum class Kind { kNoam, kConstant };
  Kind kind = Kind::kNoam;
  double scale = 5.0;
  std::int64_t d_att = 256;
  std::int64_t warmup_steps = 25000;
  double constant_rate = 1e-4;

  static LearningRateSchedule noam(double scale, std::int64_t d_att, std::int64_t warmup) {
    LearningRateSchedule s;
    s.kind = Kind::kNoam;
    s.scale = scale;
    s.d_att = d_att;
    s.warmup_steps = warmup;
    return s;
  }
  static LearningRateSchedule constant(double rate) {
    LearningRateSchedule s;
    s.kind = Kind::kConstant;
    s.constant_rate = rate;
    return s;
  }

  double rate(std::uint64_t step) const {
    if (kind == Kind::kConstant) return constant_rate;
    if (step == 0) throw Error("learning-rate steps are 1-based");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(warmup_steps);
    return scale / std::sqrt(static_cast<double>(d_att)) *
           std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
  }
};

template <typename S>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  LearningRateSchedule schedule;
  std::map<std::string, std::vector<S>> first_moment;
  std::map<std::string, std::vector<S>> second_moment;
  double last_rate = 0.0;
};

/// One Adam update with bias correction at the scheduled rate. Consumes the
/// gradients (zeroes them) and advances the store's step counter.
template <typename S>
void adam_step(ParameterStore<S>& params, AdamState<S>& state) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw NotBackpropagatedError(name);
  }
  const std::uint64_t step = params.step_count() + 1;
  const double lr = state.schedule.rate(step);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(step));
  const S b1 = static_cast<S>(state.beta1), b2 = static_cast<S>(state.beta2);
  const S step_size = static_cast<S>(lr / bc1);
  const S inv_bc2 = static_cast<S>(1.0 / bc2);
  const S eps = static_cast<S>(state.epsilon);
  for (auto& [name, p] : params) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    const auto n = static_cast<std::size_t>(p.numel());
    if (m.size() != n) m.assign(n, S{0});
    if (v.size() != n) v.assign(n, S{0});
    auto w = p.data_mut();
    auto g = p.grad();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (S{1} - b1) * g[i];
      v[i] = b2 * v[i] + (S{1} - b2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
    }
    p.zero_grad();
  }
  params.set_step_count(step);
  state.last_rate = lr;
}

}  // namespace trasr
