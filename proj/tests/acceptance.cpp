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

// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fuzz.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "search_fixtures.hpp"
#include "test_support.hpp"
#include "trasr/app/commands.hpp"
#include "trasr/core/gradcheck.hpp"
#include "trasr/model/cost.hpp"
#include "trasr/objectives/ctc.hpp"
#include "trasr/objectives/losses.hpp"

namespace trasr {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;
using testing::weighted_sum;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("trasr_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<char> file_bytes(const fs::path& p) { return io::read_file(p); }

// ---------------------------------------------------------------- gradients

class GradLedger {
 public:
  GradLedger(double op_tol, double composed_tol) : op_tol_(op_tol), composed_tol_(composed_tol) {}

  void op(const std::string& name, double err) { note(name, err, op_tol_, worst_op_, worst_op_name_); }
  void composed(const std::string& name, double err) {
    note(name, err, composed_tol_, worst_composed_, worst_composed_name_);
  }

  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty() && checks_ > 0;
    o.detail = fmt("%d checks; worst op %.2e (%s), worst composed %.2e (%s)", checks_, worst_op_,
                   worst_op_name_.c_str(), worst_composed_, worst_composed_name_.c_str());
    if (!failures_.empty()) o.detail += "; over tolerance: " + failures_;
    return o;
  }

 private:
  void note(const std::string& name, double err, double tol, double& worst, std::string& worst_name) {
    ++checks_;
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
    if (!(err < tol)) failures_ += (failures_.empty() ? "" : ", ") + name + fmt("=%.2e", err);
  }

  double op_tol_, composed_tol_;
  double worst_op_ = 0.0, worst_composed_ = 0.0;
  std::string worst_op_name_ = "-", worst_composed_name_ = "-", failures_;
  int checks_ = 0;
};

void check_primitive_ops(GradLedger& g, std::uint64_t seed) {
  const std::string s = "@" + std::to_string(seed);
  Rng rng(seed);
  auto probe = [seed](const Tensor64& y, std::uint64_t salt) {
    Rng w(seed * 1000 + salt);
    return weighted_sum(y, w);
  };
  auto a = random_tensor({2, 3, 4}, rng), b = random_tensor({4}, rng), c = random_tensor({2, 3, 4}, rng);
  g.op("add" + s, grad_check([&] { return probe(add(a, b), 1); }, {a, b}).max_error);
  g.op("sub" + s, grad_check([&] { return probe(sub(a, c), 2); }, {a, c}).max_error);
  g.op("mul" + s, grad_check([&] { return probe(mul(a, b), 3); }, {a, b}).max_error);
  g.op("scale" + s, grad_check([&] { return probe(scale(a, 1.7), 4); }, {a}).max_error);
  auto pos = random_tensor({3, 4}, rng, 0.2, 1.5);
  g.op("relu" + s, grad_check([&] { return probe(relu(pos), 5); }, {pos}).max_error);
  g.op("sum" + s, grad_check([&] { return sum(mul(a, c)); }, {a}).max_error);
  g.op("mean" + s, grad_check([&] { return mean(mul(a, c)); }, {a}).max_error);

  auto m1 = random_tensor({2, 3, 4}, rng), m2 = random_tensor({4, 5}, rng), m3 = random_tensor({2, 4, 2}, rng);
  g.op("matmul" + s, grad_check([&] { return probe(matmul(m1, m2), 6); }, {m1, m2}).max_error);
  g.op("matmul.batched" + s, grad_check([&] { return probe(matmul(m1, m3), 7); }, {m1, m3}).max_error);

  auto x = random_tensor({3, 5}, rng, -2, 2);
  const Mask mask{{1, 5}, {1, 0, 1, 1, 0}};
  g.op("softmax" + s, grad_check([&] { return probe(softmax(x, -1), 8); }, {x}).max_error);
  g.op("softmax.axis0" + s, grad_check([&] { return probe(softmax(x, 0), 9); }, {x}).max_error);
  g.op("masked_softmax" + s, grad_check([&] { return probe(masked_softmax(x, &mask), 10); }, {x}).max_error);
  g.op("log_softmax" + s, grad_check([&] { return probe(log_softmax(x, -1), 11); }, {x}).max_error);

  auto ln_x = random_tensor({2, 3, 6}, rng, -2, 2);
  auto gain = random_tensor({6}, rng, 0.5, 1.5), bias = random_tensor({6}, rng);
  g.op("layer_norm" + s, grad_check([&] { return probe(layer_norm(ln_x, gain, bias), 12); }, {ln_x, gain, bias}).max_error);

  auto img = random_tensor({2, 2, 7, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng), kb = random_tensor({3}, rng);
  g.op("conv2d" + s, grad_check([&] { return probe(conv2d(img, k, kb, {2, 2, 0, 0}), 13); }, {img, k, kb}).max_error);
  g.op("conv2d.same" + s, grad_check([&] { return probe(conv2d(img, k, kb, {1, 1, 1, 1}), 14); }, {img, k, kb}).max_error);

  // Distinct, well separated values so no pooling window has a near tie.
  std::vector<double> v(2 * 6 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.1;
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
  auto pool_in = Tensor64::from_data({1, 2, 6, 4}, v);
  g.op("max_pool2d" + s, grad_check([&] { return probe(max_pool2d(pool_in, 2, 2), 15); }, {pool_in}).max_error);

  auto table = random_tensor({6, 3}, rng);
  g.op("embedding" + s,
       grad_check([&] { return probe(embedding_lookup(table, {5, 0, 5, 2, 1, 1}, {2, 3}), 16); }, {table}).max_error);
  g.op("concat" + s, grad_check([&] { return probe(concat_last_axis<double>({a, c}), 17); }, {a, c}).max_error);
  g.op("permute" + s, grad_check([&] { return probe(permute(a, {2, 0, 1}), 18); }, {a}).max_error);
  g.op("transpose" + s, grad_check([&] { return probe(transpose(a, 1, 2), 19); }, {a}).max_error);
  g.op("reshape" + s, grad_check([&] { return probe(reshape(a, {6, -1}), 20); }, {a}).max_error);
  g.op("slice" + s, grad_check([&] { return probe(slice(a, 1, 1, 3), 21); }, {a}).max_error);
  g.op("dropout" + s, grad_check(
                          [&] {
                            Rng drop(seed + 5);
                            return probe(dropout(a, 0.3, true, drop), 22);
                          },
                          {a})
                          .max_error);
  g.op("positional_encoding" + s, grad_check([&] { return probe(add_positional_encoding(a), 23); }, {a}).max_error);

  // Objectives
  auto logits = random_tensor({6, 4}, rng, -2, 2);
  g.op("ctc" + s, grad_check([&] { return ctc_loss(log_softmax(logits, -1), {1, 2, 2}, 0); }, {logits}).max_error);
  auto raw = random_tensor({5, 3}, rng, -2, 0);
  g.op("ctc.raw" + s, grad_check([&] { return ctc_loss(raw, {1, 2}, 0); }, {raw}).max_error);
  auto batch_lp = random_tensor({2, 5, 4}, rng, -2, 2);
  g.op("ctc.batched" + s, grad_check(
                              [&] {
                                return ctc_loss(log_softmax(batch_lp, -1), {5, 3}, {{1, 2}, {3}}, 0);
                              },
                              {batch_lp})
                              .max_error);
  auto ce_logits = random_tensor({4, 5}, rng, -2, 2);
  g.op("ce_label_smoothed" + s, grad_check([&] { return ce_label_smoothed(ce_logits, {1, 4, 0, 2}, {1, 1, 0, 1}, 0.1); },
                                           {ce_logits})
                                    .max_error);
  auto teacher = random_tensor({4, 5}, rng, -2, 2);
  g.op("skd" + s, grad_check([&] { return skd_loss(teacher, ce_logits, {1, 0, 1, 1}); }, {ce_logits}).max_error);
  g.op("skd.temperature" + s,
       grad_check([&] { return skd_loss(teacher, ce_logits, {1, 1, 1, 1}, 2.0); }, {ce_logits}).max_error);
}

void check_model_blocks(GradLedger& g, std::uint64_t seed) {
  const std::string s = "@" + std::to_string(seed);
  Rng rng(seed + 50);
  AttentionWeights<double> w{random_tensor({6, 6}, rng), random_tensor({6, 6}, rng), random_tensor({6, 6}, rng),
                             random_tensor({6, 6}, rng)};
  auto xq = random_tensor({2, 3, 6}, rng), xkv = random_tensor({2, 4, 6}, rng);
  const Mask mask = key_padding_mask({4, 2}, 4);
  g.op("multi_head_attention" + s, grad_check(
                                       [&] {
                                         Rng p(seed + 1);
                                         return weighted_sum(
                                             multi_head_attention(xq, xkv, w, 3, &mask, {3, 3}, {4, 2}, {}), p);
                                       },
                                       {xq, xkv, w.wq, w.wk, w.wv, w.wo})
                                       .max_error);

  FeedForwardWeights<double> f{{random_tensor({6, 10}, rng), random_tensor({10}, rng)},
                               {random_tensor({10, 6}, rng), random_tensor({6}, rng)}};
  g.op("ffn" + s, grad_check(
                      [&] {
                        Rng p(seed + 2);
                        return weighted_sum(position_wise_ffn(xkv, f, 0.0, {}, "ffn"), p);
                      },
                      {xkv, f.w1.weight, f.w1.bias, f.w2.weight, f.w2.bias})
                      .max_error);

  LinearWeights<double> proj{random_tensor({12, 6}, rng), random_tensor({6}, rng)};
  auto frames = random_tensor({2, 7, 6}, rng);
  g.op("time_reduce" + s, grad_check(
                              [&] {
                                Rng p(seed + 3);
                                return weighted_sum(time_reduce(frames, {7, 5}, proj).x, p);
                              },
                              {frames, proj.weight, proj.bias})
                              .max_error);

  for (auto kind : {FrontendKind::kConv2d4, FrontendKind::kVggConv2d4}) {
    auto cfg = testing::tiny_model_config(kind);
    cfg.frontend.feature_dim = 9;
    auto params = testing::randomized<double>(cfg, seed);
    auto feats = random_tensor({2, 11, 9}, rng);
    std::vector<Tensor64> inputs{feats};
    for (const auto& [name, t] : params) {
      if (name.rfind("frontend.", 0) == 0) inputs.push_back(t);
    }
    g.composed("subsample." + std::string(to_string(kind)) + s,
               grad_check(
                   [&] {
                     Rng p(seed + 4);
                     return weighted_sum(subsample(feats, {11, 9}, cfg.frontend_config(), params).x, p);
                   },
                   inputs)
                   .max_error);
  }
}

void check_layer_composition(GradLedger& g, std::uint64_t seed) {
  const std::string s = "@" + std::to_string(seed);
  auto cfg = testing::tiny_model_config(FrontendKind::kIdentity);
  for (bool pre_norm : {true, false}) {
    cfg.pre_norm = pre_norm;
    const std::string tag = pre_norm ? ".pre_norm" : ".post_norm";
    auto p = testing::randomized<double>(cfg, seed);
    Rng rng(seed + 70);
    auto x = random_tensor({1, 4, 8}, rng);
    std::vector<Tensor64> enc_in{x};
    for (const auto& [name, t] : p) {
      if (name.rfind("enc.layer0.", 0) == 0) enc_in.push_back(t);
    }
    const auto lw = EncoderLayerWeights<double>::bind(p, "enc.layer0");
    g.composed("encoder_layer" + tag + s, grad_check(
                                              [&] {
                                                Rng pr(seed + 5);
                                                return weighted_sum(encoder_layer(x, {4}, lw, {2, 0.0, pre_norm, "l"}, {}), pr);
                                              },
                                              enc_in)
                                              .max_error);

    DecoderMemory<double> mem{random_tensor({1, 3, 8}, rng), {3}};
    std::vector<Tensor64> dec_in{mem.x};
    for (const auto& [name, t] : p) {
      if (name.rfind("dec.", 0) == 0) dec_in.push_back(t);
    }
    const std::vector<std::int64_t> tok{2, 5, 6, 3};
    g.composed("decoder_layer" + tag + s, grad_check(
                                              [&] {
                                                Rng pr(seed + 6);
                                                return weighted_sum(decode_forward(tok, 1, 4, {4}, mem, cfg, p), pr);
                                              },
                                              dec_in)
                                              .max_error);
  }

  // Front-end, one encoder layer, time reduction, decoder layer and both
  // losses in one graph.
  auto full = testing::tiny_model_config(FrontendKind::kIdentity);
  full.e1 = 1;
  full.e2 = 0;
  full.tr_enabled = true;
  auto p = testing::randomized<double>(full, seed);
  Rng rng(seed + 90);
  auto x = random_tensor({1, 8, 16}, rng);
  std::vector<Tensor64> inputs{x};
  for (auto& [name, t] : p) inputs.push_back(t);
  const std::vector<std::int64_t> dec_in{2, 5, 6}, dec_out{5, 6, 3};
  g.composed("encoder+decoder+losses" + s, grad_check(
                                               [&] {
                                                 auto enc = encode(x, {8}, full, p);
                                                 auto logits = decode_forward(dec_in, 1, 3, {3},
                                                                              DecoderMemory<double>{enc.x, enc.lengths},
                                                                              full, p);
                                                 auto ctc_lp = ctc_log_probs(enc.x, p);
                                                 auto l_ctc = ctc_loss(reshape(ctc_lp, {enc.lengths[0], -1}),
                                                                       {5, 6}, 0);
                                                 auto l_s2s = ce_label_smoothed(reshape(logits, {3, -1}), dec_out,
                                                                                {1, 1, 1}, 0.1);
                                                 return joint_loss(l_ctc, l_s2s, 0.3);
                                               },
                                               inputs)
                                               .max_error);
}

Outcome gradient_integrity() {
  GradLedger g(1e-4, 1e-3);
  for (std::uint64_t seed : {1, 2, 3}) {
    check_primitive_ops(g, seed);
    check_model_blocks(g, seed);
    check_layer_composition(g, seed);
  }
  return g.outcome();
}

// ---------------------------------------------------------------- CTC

Outcome ctc_oracle() {
  Rng rng(20240);
  int checked = 0;
  double worst = 0.0;
  while (checked < 200) {
    const auto V = rng.uniform_int(2, 4), T = rng.uniform_int(1, 6);
    std::vector<std::int64_t> target(static_cast<std::size_t>(rng.uniform_int(0, 3)));
    for (auto& c : target) c = rng.uniform_int(1, V - 1);
    if (ctc_min_frames(target) > T) continue;
    Tensor64 lp;
    {
      NoGradGuard guard;
      lp = log_softmax(random_tensor({T, V}, rng, -3, 3), -1).detach();
    }
    const double p = oracle::ctc_probability(lp.values(), T, V, target, 0);
    worst = std::max(worst, std::abs(ctc_loss(lp, target, 0).item() - -std::log(p)));
    ++checked;
  }
  const double h = std::log(0.5);
  const double worked = ctc_loss(Tensor64::from_data({2, 2}, {h, h, h, h}), {1}, 0).item();
  const double worked_err = std::abs(worked - -std::log(0.75));
  return {worst <= 1e-6 && worked_err <= 1e-12,
          fmt("%d instances, max |log-domain error| %.2e; worked instance %.12f (err %.1e)", checked, worst, worked,
              worked_err)};
}

// ---------------------------------------------------------------- beam search

constexpr int kBeamInstances = 60;
constexpr std::uint64_t kBeamSeedBase = 7000;

Outcome beam_oracle() {
  int exact = 0, finished = 0;
  std::string first_bad;
  for (std::uint64_t i = 1; i <= kBeamInstances; ++i) {
    auto in = testing::make_instance(kBeamSeedBase + i);
    const auto oracle_best = testing::exhaustive_best(in);
    const auto r = testing::run_beam(in, 64);
    finished += r.finished;
    if (r.best.body() == oracle_best.body && std::abs(r.best.score - oracle_best.score) <= 1e-9) {
      ++exact;
    } else if (first_bad.empty()) {
      first_bad = "; argmax differs at instance " + std::to_string(i);
    }
  }
  return {exact == kBeamInstances && finished == kBeamInstances,
          fmt("saturated beam: %d/%d exact argmax and score%s", exact, kBeamInstances, first_bad.c_str())};
}

Outcome beam_monotonicity() {
  int monotone = 0;
  std::string counterexample;
  for (std::uint64_t i = 1; i <= kBeamInstances; ++i) {
    auto in = testing::make_instance(kBeamSeedBase + i);
    double best = -std::numeric_limits<double>::infinity();
    int best_beam = 0;
    bool ok = true;
    for (int beam = 1; beam <= 16 && ok; ++beam) {
      const double s = testing::run_beam(in, beam).best.score;
      if (s < best - 1e-12) {
        ok = false;
        if (counterexample.empty()) {
          counterexample = fmt("; instance %d: beam %d scores %.4f, beam %d scored %.4f", static_cast<int>(i), beam,
                               s, best_beam, best);
        }
      }
      if (s > best) {
        best = s;
        best_beam = beam;
      }
    }
    monotone += ok;
  }
  return {monotone == kBeamInstances,
          fmt("%d/%d instances non-decreasing over beams 1..16%s", monotone, kBeamInstances, counterexample.c_str())};
}

// ---------------------------------------------------------------- frame rate

Outcome frame_rate() {
  Rng rng(404);
  int checked = 0, bad = 0;
  std::string first_bad;
  for (int e1 : {0, 2}) {
    auto cfg = testing::tiny_model_config(FrontendKind::kConv2d4);
    cfg.e1 = e1;
    cfg.e2 = 3 - std::min(e1, 1);
    cfg.tr_enabled = true;
    auto params = init_model_parameters<float>(cfg, 9);
    for (int i = 0; i < 200; ++i) {
      const std::int64_t T = rng.uniform_int(11, 1200);
      // Independent floor arithmetic: two valid 3x3 stride-2 convs, then pairing.
      const std::int64_t conv1 = (T - 3) / 2 + 1, conv2 = (conv1 - 3) / 2 + 1, tr = conv2 / 2;
      MacCounter counter;
      ForwardContext ctx;
      ctx.counter = &counter;
      const bool run_forward = i < 25;  // the full forward is the slow part
      std::int64_t measured = encoder_output_length(cfg, T);
      bool placement_ok = true;
      if (run_forward) {
        Rng fr(static_cast<std::uint64_t>(T));
        auto out = encode(random_tensor<float>({1, T, 16}, fr), {T}, cfg, params, ctx);
        measured = out.lengths[0];
        if (out.x.dim(1) != measured) placement_ok = false;
        const auto& calls = counter.calls();
        for (int l = 0; l < static_cast<int>(calls.size()); ++l) {
          const auto expect = l < e1 ? conv2 : tr;
          if (calls[l].query_length != expect) placement_ok = false;
        }
      }
      const bool ok = measured == tr && encoder_output_length(cfg, T) == tr && tr == (T - 3) / 8 &&
                      8 * tr <= T && T < 8 * (tr + 1) + 3 && placement_ok;
      ++checked;
      if (!ok) {
        ++bad;
        if (first_bad.empty()) first_bad = fmt("T=%lld e1=%d", static_cast<long long>(T), e1);
      }
    }
  }
  return {bad == 0, fmt("%d lengths over TR0 and TR2, %d mismatches%s%s", checked, bad, first_bad.empty() ? "" : "; first ",
                        first_bad.c_str())};
}

// ---------------------------------------------------------------- complexity

ModelConfig desk_model_config();

Outcome complexity_counts() {
  auto base = desk_model_config();
  base.vocab_size = 12;
  const auto cells = run_benchmark<float>(base, {200, 400, 800}, 1, 1);
  int match = 0;
  for (const auto& c : cells) match += c.records_match && c.analytic_macs == c.measured_macs;

  // Even lengths: layer before TR vs layer after, measured and analytic.
  auto cfg = testing::tiny_model_config(FrontendKind::kIdentity);
  cfg.e1 = 2;
  cfg.e2 = 2;
  cfg.tr_enabled = true;
  auto params = init_model_parameters<float>(cfg, 3);
  Rng rng(55);
  int even_checked = 0, even_exact = 0;
  for (int i = 0; i < 100; ++i) {
    const std::int64_t n = 2 * rng.uniform_int(1, 200);
    const auto analytic = count_attention_macs(cfg, n);
    const double ratio = static_cast<double>(analytic[1].score_macs) / static_cast<double>(analytic[2].score_macs);
    bool ok = ratio == 4.0;
    if (i < 20) {
      const auto measured = measure_attention_macs(cfg, params, n);
      ok = ok && measured == analytic;
    }
    ++even_checked;
    even_exact += ok;
  }
  return {match == static_cast<int>(cells.size()) && !cells.empty() && even_exact == even_checked,
          fmt("%d/%zu benchmark cells analytic == measured; ratio exactly 4.0 at %d/%d even lengths", match,
              cells.size(), even_exact, even_checked)};
}

Outcome complexity_odd_band() {
  auto cfg = testing::tiny_model_config(FrontendKind::kIdentity);
  cfg.e1 = 2;
  cfg.e2 = 2;
  cfg.tr_enabled = true;
  int inside = 0, total = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::int64_t n = 3; n <= 801; n += 2) {
    const auto calls = count_attention_macs(cfg, n);
    const double ratio = static_cast<double>(calls[1].score_macs) / static_cast<double>(calls[2].score_macs);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    inside += ratio >= 3.8 && ratio <= 4.0;
    ++total;
  }
  return {inside == total, fmt("%d/%d odd lengths in [3.8, 4.0]; floor pairing gives n^2/((n-1)/2)^2 in [%.4f, %.4f]",
                               inside, total, lo, hi)};
}

// ---------------------------------------------------------------- loss algebra

Outcome loss_algebra() {
  Rng rng(61);
  int bit_exact = 0, endpoints = 0, constant = 0, gibbs = 0, equality = 0;
  double worst_gap = 0.0, worst_equal = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double c = rng.uniform(0, 20), s = rng.uniform(0, 20), k = rng.uniform(0, 20), a = rng.uniform();
    const bool scalar_ok = finetune_loss(c, s, k, a, 0.0) == joint_loss(c, s, a);
    auto tc = Tensor::scalar(static_cast<float>(c)), ts = Tensor::scalar(static_cast<float>(s));
    auto tk = Tensor::scalar(static_cast<float>(k));
    const bool tensor_ok = finetune_loss(tc, ts, tk, a, 0.0).item() == joint_loss(tc, ts, a).item() &&
                           finetune_loss(tc, ts, Tensor(), a, 0.0).item() == joint_loss(tc, ts, a).item();
    bit_exact += scalar_ok && tensor_ok;

    const int T = static_cast<int>(rng.uniform_int(1, 500));
    const double phi = rng.uniform();
    endpoints += phi_schedule(T, KDConfig{phi, T, PhiMode::kLinear}) == phi;
    const KDConfig fixed{phi, T, PhiMode::kFixed};
    bool flat = true;
    for (int t = 1; t <= T; t += std::max(1, T / 17)) flat = flat && phi_schedule(t, fixed) == phi;
    constant += flat && phi_schedule(T, fixed) == phi;

    const auto rows = rng.uniform_int(1, 4), V = rng.uniform_int(2, 12);
    const double tau = i % 2 ? 1.0 : rng.uniform(0.5, 3.0);
    auto teacher = random_tensor({rows, V}, rng, -4, 4), student = random_tensor({rows, V}, rng, -4, 4);
    const std::vector<std::uint8_t> keep(static_cast<std::size_t>(rows), 1);
    const double h = mean_entropy(teacher, keep, tau);
    const double gap = skd_loss(teacher, student, keep, tau).item() - h;
    worst_gap = std::min(worst_gap, gap);
    gibbs += gap >= -1e-9;
    const double eq = std::abs(skd_loss(teacher, teacher, keep, tau).item() - h);
    worst_equal = std::max(worst_equal, eq);
    equality += eq <= 1e-9;
  }
  return {bit_exact == 1000 && endpoints == 1000 && constant == 1000 && gibbs == 1000 && equality == 1000,
          fmt("phi=0 bit-exact %d/1000; linear endpoint %d/1000; fixed constant %d/1000; "
              "skd >= H %d/1000 (min gap %.1e); skd == H at student=teacher %d/1000 (max %.1e)",
              bit_exact, endpoints, constant, gibbs, worst_gap, equality, worst_equal)};
}

// ---------------------------------------------------------------- overfit

fs::path source_dir() { return TRASR_SOURCE_DIR; }

ExperimentConfig desk_config() { return load_config(source_dir() / "configs" / "desk.conf"); }

ModelConfig desk_model_config() { return desk_config().model; }

Outcome end_to_end_overfit() {
  const auto start = std::chrono::steady_clock::now();
  const auto root = scratch("overfit");
  auto cfg = desk_config();
  set_config_value(cfg, "paths.out", (root / "data").string());
  std::ostringstream quiet;
  const auto ds = cmd_synth_data(cfg, quiet);
  set_config_value(cfg, "paths.train", ds.manifest.string());
  set_config_value(cfg, "paths.dev", "");
  set_config_value(cfg, "paths.vocab", ds.vocabulary.string());
  set_config_value(cfg, "paths.out", (root / "train").string());
  const auto trained = cmd_train(cfg, quiet);
  const double acc = trained.records.back().dev_accuracy;
  double best_acc = 0.0;
  for (const auto& r : trained.records) best_acc = std::max(best_acc, r.dev_accuracy);

  auto dec = cfg;
  set_config_value(dec, "decode.mode", "greedy");
  set_config_value(dec, "paths.out", (root / "decode").string());
  const auto report = cmd_decode(dec, root / "train" / "last.trck", ds.manifest, quiet);
  const double wer = report.words.rate();

  auto ft = cfg;
  set_config_value(ft, "paths.init_checkpoint", (root / "train" / "last.trck").string());
  set_config_value(ft, "paths.out", (root / "fskd").string());
  const auto tuned = cmd_finetune_skd(ft, quiet);
  const double before = tuned.records.front().dev_accuracy;
  const double after = tuned.records.back().dev_accuracy;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool ok = trained.records.size() == 100 && acc >= 0.99 && wer <= 0.05 && before == acc &&
                  before - after <= 0.01 && seconds < 600.0;
  return {ok, fmt("%zu utterances, %zu epochs: token accuracy %.4f (best %.4f), greedy WER %.2f%%; "
                  "FS-KD %zu epochs: %.4f -> %.4f; %.0f s total",
                  report.utterances.size(), trained.records.size(), acc, best_acc, 100 * wer,
                  tuned.records.size() - 1, before, after, seconds)};
}

// ---------------------------------------------------------------- formats

ExperimentConfig small_run(const fs::path& root) {
  ExperimentConfig cfg;
  apply_config_text(cfg,
                    "model.e1 = 1\nmodel.e2 = 1\nmodel.decoder_layers = 1\nmodel.d_att = 16\nmodel.d_ff = 32\n"
                    "model.heads = 2\nmodel.time_reduction = true\nmodel.frontend_channels = 4,4\n"
                    "model.feature_dim = 8\ntrain.epochs = 3\ntrain.batch_size = 3\ntrain.lr_scale = 0.5\n"
                    "train.warmup = 20\ntrain.keep_best = 2\ntrain.max_freq_width = 2\ntrain.max_time_width = 4\n"
                    "synth.alphabet = ab c\nsynth.min_frames_per_token = 10\nsynth.max_frames_per_token = 12\n"
                    "synth.train_utterances = 8\nsynth.min_tokens = 2\nsynth.max_tokens = 4\n",
                    "small");
  set_config_value(cfg, "paths.out", (root / "data").string());
  std::ostringstream quiet;
  const auto ds = cmd_synth_data(cfg, quiet);
  set_config_value(cfg, "paths.train", ds.manifest.string());
  set_config_value(cfg, "paths.vocab", ds.vocabulary.string());
  return cfg;
}

Outcome determinism_and_formats() {
  std::vector<std::string> problems;
  const auto root = scratch("formats");
  auto cfg = small_run(root);
  std::ostringstream quiet;
  for (const char* run : {"a", "b"}) {
    set_config_value(cfg, "paths.out", (root / run).string());
    auto c = cfg;
    set_config_value(c, "kd.phi", "0.5");
    (void)cmd_train(c, quiet);
    set_config_value(c, "paths.out", (root / (std::string(run) + "-skd")).string());
    (void)cmd_train_skd(c, quiet);
  }
  int identical = 0, compared = 0;
  for (const std::string suffix : {"", "-skd"}) {
    const auto da = root / ("a" + suffix), db = root / ("b" + suffix);
    std::vector<fs::path> artifacts{"epochs.jsonl", "best.txt", "last.trck"};
    for (const auto& e : fs::directory_iterator(da / "checkpoints")) artifacts.push_back("checkpoints" / e.path().filename());
    for (const auto& rel : artifacts) {
      ++compared;
      if (fs::exists(db / rel) && file_bytes(da / rel) == file_bytes(db / rel)) {
        ++identical;
      } else {
        problems.push_back(("a" + suffix + "/" + rel.string()) + " differs");
      }
    }
  }

  // Round trips
  Rng rng(81);
  std::vector<float> v(9 * 7);
  for (auto& e : v) e = static_cast<float>(rng.normal());
  v[0] = -0.0f;
  v[1] = std::numeric_limits<float>::denorm_min();
  v[2] = std::numeric_limits<float>::max();
  save_features(root / "x.trft", FeatureSequence(9, 7, v));
  const auto back = load_features(root / "x.trft");
  if (back.length != 9 || back.dim != 7 || std::memcmp(back.values.data(), v.data(), v.size() * 4) != 0) {
    problems.push_back("feature round trip");
  }
  const auto ck = load_checkpoint(root / "a" / "last.trck");
  save_checkpoint(root / "copy.trck", ck);
  const auto ck2 = load_checkpoint(root / "copy.trck");
  bool ck_same = ck.size() == ck2.size();
  for (const auto& [name, e] : ck) {
    ck_same = ck_same && ck2.count(name) && ck2.at(name).shape == e.shape &&
              std::memcmp(ck2.at(name).values.data(), e.values.data(), e.values.size() * 4) == 0;
  }
  if (!ck_same || file_bytes(root / "copy.trck") != file_bytes(root / "a" / "last.trck")) {
    problems.push_back("checkpoint round trip");
  }

  // Fuzz: every mutation must parse or throw a library error.
  struct Format {
    const char* name;
    std::vector<char> good;
    std::function<void(const std::vector<char>&)> parse;
  };
  auto text_of = [](const fs::path& p) {
    auto b = io::read_file(p);
    return std::string(b.begin(), b.end());
  };
  auto as_bytes = [](const std::string& s) { return std::vector<char>(s.begin(), s.end()); };
  Checkpoint small_ck;
  small_ck["enc.w"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
  small_ck["b"] = {{3}, {0.5f, -1, 2}};
  const std::vector<Format> formats{
      {"features", encode_features(FeatureSequence(4, 3, std::vector<float>(v.begin(), v.begin() + 12))),
       [](const std::vector<char>& b) { (void)decode_features(b, "fuzz"); }},
      {"checkpoint", encode_checkpoint(small_ck), [](const std::vector<char>& b) { (void)decode_checkpoint(b, "fuzz"); }},
      {"trained checkpoint", file_bytes(root / "a" / "last.trck"),
       [](const std::vector<char>& b) { (void)decode_checkpoint(b, "fuzz"); }},
      {"manifest", as_bytes(text_of(cfg.paths.train)),
       [](const std::vector<char>& b) { (void)parse_manifest(std::string(b.begin(), b.end()), "fuzz.tsv", false); }},
      {"vocabulary", as_bytes(text_of(cfg.paths.vocab)),
       [](const std::vector<char>& b) { (void)Vocabulary::parse(std::string(b.begin(), b.end()), "fuzz"); }},
      {"config", as_bytes(text_of(root / "a" / "train.conf")),
       [](const std::vector<char>& b) {
         ExperimentConfig c;
         apply_config_text(c, std::string(b.begin(), b.end()), "fuzz");
       }},
      {"epoch log", as_bytes(text_of(root / "a" / "epochs.jsonl")),
       [](const std::vector<char>& b) { (void)parse_epoch_records(std::string(b.begin(), b.end()), "fuzz"); }},
  };
  std::string fuzz_summary;
  std::uint64_t seed = 900;
  for (const auto& f : formats) {
    const auto r = testing::fuzz_format(f.good, f.parse, ++seed);
    fuzz_summary += fmt("%s%s %d/1000 rejected", fuzz_summary.empty() ? "" : ", ", f.name, r.rejected);
    if (!r.escaped.empty()) problems.push_back(std::string(f.name) + " fuzz escaped: " + r.escaped.front());
  }

  std::string detail = fmt("%d/%d run artifacts bit-identical across seeds; round trips lossless; fuzz: %s", identical,
                           compared, fuzz_summary.c_str());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------- averaging

Outcome checkpoint_averaging() {
  Rng rng(91);
  const auto root = scratch("average");
  Checkpoint a, b;
  for (const char* name : {"enc.w", "dec.b", "s"}) {
    const Shape shape = std::string(name) == "s" ? Shape{} : Shape{4, 5};
    std::vector<float> va(static_cast<std::size_t>(shape_numel(shape))), vb(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
      va[i] = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform_int(-6, 6)));
      vb[i] = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform_int(-6, 6)));
    }
    va[0] = std::numeric_limits<float>::denorm_min();
    a[name] = {shape, va};
    b[name] = {shape, vb};
  }
  int identity = 0, exact = 0, elements = 0;
  for (std::size_t k = 1; k <= 7; ++k) {
    const auto mean = average_checkpoints(std::vector<Checkpoint>(k, a));
    bool same = true;
    for (const auto& [name, e] : a) {
      same = same && std::memcmp(mean.at(name).values.data(), e.values.data(), e.values.size() * 4) == 0;
    }
    identity += same;
  }
  const auto two = average_checkpoints({a, b});
  for (const auto& [name, e] : a) {
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      // Correctly rounded midpoint, computed at extended precision.
      const long double mid = (static_cast<long double>(e.values[i]) + b.at(name).values[i]) / 2;
      ++elements;
      exact += two.at(name).values[i] == static_cast<float>(mid);
    }
  }
  // File-level averaging through the command.
  save_checkpoint(root / "a.trck", a);
  save_checkpoint(root / "b.trck", b);
  std::ostringstream quiet;
  const auto via_cmd = cmd_average({root / "a.trck", root / "b.trck"}, root / "avg.trck", quiet);
  const auto reloaded = load_checkpoint(root / "avg.trck");
  bool cmd_ok = fs::exists(root / "avg.trck.json");
  for (const auto& [name, e] : two) cmd_ok = cmd_ok && reloaded.at(name).values == e.values && via_cmd.at(name).values == e.values;
  return {identity == 7 && exact == elements && cmd_ok,
          fmt("mean of k identical is identity for %d/7 k; two-point average exact at %d/%d elements; command output %s",
              identity, exact, elements, cmd_ok ? "matches" : "differs")};
}

// ---------------------------------------------------------------- runner

struct Criterion {
  const char* id;
  const char* title;
  double budget_seconds;  // 0 = none
  Outcome (*run)();
  bool not_guaranteed = false;  // printed like any other line but never fails the run
};

}  // namespace
}  // namespace trasr

int main() {
  using namespace trasr;
  const std::vector<Criterion> criteria{
      {"1", "gradient integrity", 60, gradient_integrity},
      {"2", "CTC oracle", 30, ctc_oracle},
      {"3a", "beam-search oracle", 60, beam_oracle},
      {"3b", "beam-size monotonicity", 60, beam_monotonicity, true},
      {"4", "frame-rate arithmetic", 0, frame_rate},
      {"5a", "complexity: counts and even-length ratio", 60, complexity_counts},
      {"5b", "complexity: odd-length ratio band", 60, complexity_odd_band, true},
      {"6", "loss algebra", 0, loss_algebra},
      {"7", "end-to-end overfit", 600, end_to_end_overfit},
      {"8", "determinism and formats", 0, determinism_and_formats},
      {"9", "checkpoint averaging", 0, checkpoint_averaging},
  };
  int unexpected_failures = 0;
  std::vector<std::string> tolerated;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    std::printf("%s  %-3s %-42s %7.1f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && c.not_guaranteed) {
      tolerated.push_back(c.id);
    } else if (!o.pass) {
      ++unexpected_failures;
    }
  }
  if (unexpected_failures > 0) {
    std::printf("%d criterion line(s) failed\n", unexpected_failures);
    return 1;
  }
  if (tolerated.empty()) {
    std::printf("all criteria passed\n");
  } else {
    std::string ids;
    for (const auto& id : tolerated) ids += (ids.empty() ? "" : ", ") + id;
    std::printf("all other criteria passed; not guaranteed and failed: %s\n", ids.c_str());
  }
  return 0;
}
