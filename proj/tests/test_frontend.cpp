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

#include <gtest/gtest.h>

#include <cmath>

#include "trasr/frontend/positional_encoding.hpp"
#include "trasr/frontend/spec_augment.hpp"
#include "trasr/frontend/subsample.hpp"

namespace trasr {
namespace {

FrontendConfig small_config(FrontendKind kind, std::int64_t F = 16) {
  FrontendConfig c;
  c.kind = kind;
  c.feature_dim = F;
  c.d_att = 8;
  c.channels.assign(static_cast<std::size_t>(stage_count(kind)), 3);
  return c;
}

ParameterStore<float> init_frontend(const FrontendConfig& c, std::uint64_t seed) {
  ParameterStore<float> p;
  add_parameters(p, frontend_parameter_specs(c), Rng(seed));
  return p;
}

Tensor random_features(std::int64_t B, std::int64_t T, std::int64_t F, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(B * T * F));
  for (auto& e : v) e = static_cast<float>(rng.normal());
  return Tensor::from_data({B, T, F}, std::move(v));
}

const FrontendKind kAllKinds[] = {FrontendKind::kConv2d4, FrontendKind::kConv2d8, FrontendKind::kVggConv2d4,
                                  FrontendKind::kVggConv2d8, FrontendKind::kIdentity};

TEST(OutputLength, WorkedExamples) {
  EXPECT_EQ(output_length(FrontendKind::kConv2d4, 19), 4);
  EXPECT_EQ(output_length(FrontendKind::kConv2d8, 83), 9);
  EXPECT_EQ(output_length(FrontendKind::kVggConv2d8, 40), 5);
  EXPECT_EQ(output_length(FrontendKind::kVggConv2d4, 20), 5);
  EXPECT_EQ(output_length(FrontendKind::kIdentity, 7), 7);
  EXPECT_EQ(output_length(FrontendKind::kConv2d4, 6), 0);
  EXPECT_EQ(minimum_input_length(FrontendKind::kConv2d4), 7);
  EXPECT_EQ(minimum_input_length(FrontendKind::kConv2d8), 15);
  EXPECT_EQ(minimum_input_length(FrontendKind::kVggConv2d8), 8);
}

// Below T=87 the valid-conv floors push the ratio past 2.2 (T=22 gives 4/1).
TEST(OutputLength, FourAndEightfoldConvRatio) {
  EXPECT_EQ(output_length(FrontendKind::kConv2d4, 22), 4);
  EXPECT_EQ(output_length(FrontendKind::kConv2d8, 22), 1);
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const auto T = rng.uniform_int(87, 400);
    const double r = static_cast<double>(output_length(FrontendKind::kConv2d4, T)) /
                     static_cast<double>(output_length(FrontendKind::kConv2d8, T));
    EXPECT_GE(r, 1.8) << T;
    EXPECT_LE(r, 2.2) << T;
  }
}

TEST(Subsample, ForwardLengthMatchesArithmetic) {
  Rng rng(3);
  for (auto kind : kAllKinds) {
    auto cfg = small_config(kind);
    auto params = init_frontend(cfg, 1);
    for (std::int64_t T : {minimum_input_length(kind), std::int64_t{19}, std::int64_t{26}, std::int64_t{33}}) {
      auto out = subsample(random_features(1, T, cfg.feature_dim, rng), {T}, cfg, params);
      EXPECT_EQ(out.lengths[0], output_length(kind, T)) << to_string(kind) << " T=" << T;
      EXPECT_EQ(out.x.dim(1), out.lengths[0]);
      EXPECT_EQ(out.x.dim(2), cfg.d_att);
    }
  }
}

TEST(Subsample, TooShortInputNamesMinimum) {
  auto cfg = small_config(FrontendKind::kConv2d8);
  auto params = init_frontend(cfg, 1);
  Rng rng(1);
  try {
    (void)subsample(random_features(1, 14, cfg.feature_dim, rng), {14}, cfg, params);
    FAIL() << "expected SequenceTooShortError";
  } catch (const SequenceTooShortError& e) {
    EXPECT_NE(std::string(e.what()).find("15"), std::string::npos);
  }
}

TEST(Subsample, IdentityIsLinearProjection) {
  auto cfg = small_config(FrontendKind::kIdentity, 4);
  cfg.positional_encoding = false;
  auto params = init_frontend(cfg, 2);
  Rng rng(5);
  auto x = random_features(1, 7, 4, rng);
  auto out = subsample(x, {7}, cfg, params);
  auto ref = add(matmul(x, params.get("frontend.out.weight")), params.get("frontend.out.bias"));
  EXPECT_EQ(out.lengths[0], 7);
  EXPECT_EQ(out.x.values(), ref.values());
}

TEST(Subsample, PaddingNeverReachesValidFrames) {
  Rng rng(9);
  for (auto kind : kAllKinds) {
    auto cfg = small_config(kind);
    auto params = init_frontend(cfg, 4);
    const std::int64_t T = 40, L = 27;
    auto x = random_features(2, T, cfg.feature_dim, rng);
    auto perturbed = x.values();
    for (std::int64_t t = L; t < T; ++t) {
      for (std::int64_t f = 0; f < cfg.feature_dim; ++f) perturbed[(T + t) * cfg.feature_dim + f] += 100.0f;
    }
    auto a = subsample(x, {T, L}, cfg, params);
    auto b = subsample(Tensor::from_data(x.shape(), perturbed), {T, L}, cfg, params);
    ASSERT_EQ(a.lengths, b.lengths);
    const auto n = a.x.dim(1), d = a.x.dim(2);
    for (std::int64_t t = 0; t < a.lengths[1]; ++t) {
      for (std::int64_t k = 0; k < d; ++k) {
        EXPECT_EQ(a.x.data()[(n + t) * d + k], b.x.data()[(n + t) * d + k]) << to_string(kind);
      }
    }
    // Padded batch row agrees with the same sequence alone.
    std::vector<float> solo(x.data().begin() + T * cfg.feature_dim, x.data().begin() + (T + L) * cfg.feature_dim);
    auto c = subsample(Tensor::from_data({1, L, cfg.feature_dim}, solo), {L}, cfg, params);
    for (std::int64_t t = 0; t < a.lengths[1]; ++t) {
      for (std::int64_t k = 0; k < d; ++k) {
        EXPECT_NEAR(a.x.data()[(n + t) * d + k], c.x.data()[t * d + k], 1e-5) << to_string(kind);
      }
    }
  }
}

TEST(Subsample, PositionalEncodingToggleDiffersByTable) {
  Rng rng(2);
  for (auto kind : kAllKinds) {
    auto cfg = small_config(kind);
    EXPECT_EQ(cfg.apply_positional_encoding(), !is_vgg(kind));
    auto params = init_frontend(cfg, 6);
    auto x = random_features(1, 30, cfg.feature_dim, rng);
    cfg.positional_encoding = false;
    auto off = subsample(x, {30}, cfg, params);
    cfg.positional_encoding = true;
    auto on = subsample(x, {30}, cfg, params);
    const auto pe = sinusoid_table<float>(off.x.dim(1), cfg.d_att);
    for (std::size_t i = 0; i < pe.size(); ++i) EXPECT_NEAR(on.x.data()[i] - off.x.data()[i], pe[i], 1e-5);
  }
}

TEST(PositionalEncoding, KnownValuesAndRange) {
  auto pe = sinusoid_table<double>(50, 16);
  for (std::int64_t i = 0; i < 8; ++i) {
    EXPECT_EQ(pe[2 * i], 0.0);
    EXPECT_EQ(pe[2 * i + 1], 1.0);
  }
  for (double v : pe) {
    EXPECT_LE(v, 1.0);
    EXPECT_GE(v, -1.0);
  }
  auto shorter = sinusoid_table<double>(20, 16);
  EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), pe.begin()));
  EXPECT_THROW(sinusoid_table<double>(3, 5), DimensionError);
}

FeatureSequence ones(std::int64_t T, std::int64_t F) {
  return FeatureSequence(T, F, std::vector<float>(static_cast<std::size_t>(T * F), 1.0f));
}

TEST(SpecAugment, ZeroWidthsAreIdentity) {
  Rng rng(1);
  auto x = ones(50, 40);
  auto y = spec_augment(x, {2, 0, 2, 0}, rng);
  EXPECT_EQ(x.values, y.values);
}

TEST(SpecAugment, UntouchedCellCountBound) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::int64_t T = 90, F = 40;
    auto y = spec_augment(ones(T, F), SpecAugmentConfig{}, rng);
    std::int64_t kept = 0;
    for (float v : y.values) kept += v != 0.0f;
    EXPECT_GE(kept, (F - 2 * 10) * (T - 2 * 20));
  }
}

TEST(SpecAugment, MasksStayInsideTrueLength) {
  Rng rng(4);
  auto x = ones(60, 20);
  x.length = 30;
  auto y = spec_augment(x, {2, 5, 3, 20}, rng);
  for (std::int64_t t = 30; t < 60; ++t) {
    for (std::int64_t f = 0; f < 20; ++f) EXPECT_EQ(y.at(t, f), 1.0f);
  }
}

TEST(SpecAugment, SeedDeterminism) {
  Rng a(77), b(77);
  auto x = ones(80, 40);
  EXPECT_EQ(spec_augment(x, {}, a).values, spec_augment(x, {}, b).values);
}

}  // namespace
}  // namespace trasr
