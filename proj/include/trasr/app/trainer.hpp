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
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trasr/app/config.hpp"
#include "trasr/app/corpus.hpp"
#include "trasr/core/adam.hpp"
#include "trasr/core/checkpoint.hpp"
#include "trasr/data/batching.hpp"
#include "trasr/model/asr_model.hpp"
#include "trasr/model/decoder.hpp"
#include "trasr/objectives/losses.hpp"

namespace trasr {

/// Exclusive claim on an output directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// One line of epochs.jsonl.
struct EpochRecord {
  int epoch = 0;
  std::optional<LossBreakdown> train;  // absent for the epoch-0 evaluation
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;
  std::optional<double> teacher_entropy;
  double learning_rate = 0.0;
  std::uint64_t steps = 0;
  std::string checkpoint;  // relative to the output directory

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    if (train) {
      j["train"] = {{"ctc", train->l_ctc}, {"s2s", train->l_s2s}, {"skd", train->l_skd},
                    {"total", train->total}, {"alpha", train->alpha}, {"phi", train->phi_kd}};
    }
    j["dev"] = {{"loss", dev_loss}, {"accuracy", dev_accuracy}};
    if (teacher_entropy) j["teacher_entropy"] = *teacher_entropy;
    j["lr"] = learning_rate;
    j["steps"] = steps;
    if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
    return j;
  }

  static EpochRecord from_json(const nlohmann::json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    if (j.contains("train")) {
      const auto& t = j["train"];
      r.train = LossBreakdown{t.at("ctc"), t.at("s2s"), t.at("skd"), t.at("total"), t.at("alpha"), t.at("phi")};
    }
    r.dev_loss = j.at("dev").at("loss");
    r.dev_accuracy = j.at("dev").at("accuracy");
    if (j.contains("teacher_entropy")) r.teacher_entropy = j["teacher_entropy"].get<double>();
    r.learning_rate = j.at("lr");
    r.steps = j.at("steps");
    if (j.contains("checkpoint")) r.checkpoint = j["checkpoint"];
    return r;
  }
};

/// Parses epochs.jsonl text; a torn final line (crash mid-write) is ignored.
inline std::vector<EpochRecord> parse_epoch_records(const std::string& text, const std::string& source) {
  std::vector<EpochRecord> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    const bool last = end == std::string::npos;
    if (last) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    if (!line.empty()) {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        if (last) break;
        throw FormatError(source, pos, "malformed epoch record");
      }
      try {
        if (!j.is_object()) throw FormatError(source, pos, "epoch record is not an object");
        out.push_back(EpochRecord::from_json(j));
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(source, pos, std::string("bad epoch record field: ") + e.what());
      }
    }
    pos = end + 1;
  }
  return out;
}

inline std::vector<EpochRecord> read_epoch_records(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_epoch_records(std::string(bytes.begin(), bytes.end()), path.string());
}

template <typename S>
struct ModelOutputs {
  BasicTensor<S> ctc_log_probs;  // [B, n, V]
  std::vector<std::int64_t> encoder_lengths;
  BasicTensor<S> logits;  // [B * (U+1), V]
};

template <typename S>
ModelOutputs<S> run_model(const ModelConfig& cfg, const ParameterStore<S>& params, const Batch<S>& b,
                          const ForwardContext& ctx) {
  auto enc = encode(b.features, b.feature_lengths, cfg, params, ctx);
  auto lp = ctc_log_probs(enc.x, params);
  const DecoderMemory<S> memory{enc.x, enc.lengths};
  auto logits = decode_forward(b.decoder_input, b.size(), b.decoder_steps(), b.decoder_lengths, memory, cfg, params, ctx);
  return {lp, std::move(enc.lengths), reshape(logits, {b.size() * b.decoder_steps(), cfg.vocab_size})};
}

/// Argmax hits over kept decoder positions.
template <typename S>
std::pair<std::int64_t, std::int64_t> token_hits(const BasicTensor<S>& logits, const Batch<S>& b) {
  const std::int64_t V = logits.dim(-1), rows = logits.dim(0);
  const auto v = logits.data();
  std::int64_t hit = 0, total = 0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!b.decoder_keep[static_cast<std::size_t>(r)]) continue;
    const auto* row = v.data() + r * V;
    hit += std::max_element(row, row + V) - row == b.decoder_output[static_cast<std::size_t>(r)];
    ++total;
  }
  return {hit, total};
}

struct Evaluation {
  double loss = 0.0;  // joint loss, token-weighted over batches
  double accuracy = 0.0;
  std::int64_t tokens = 0;
};

template <typename S>
Evaluation evaluate(const ModelConfig& cfg, const ParameterStore<S>& params, const Corpus& corpus,
                    std::int64_t batch_size, double alpha, double label_smoothing) {
  NoGradGuard guard;
  Evaluation ev;
  std::int64_t hits = 0;
  double loss = 0.0;
  for (const auto& idx : make_batches(corpus.frame_lengths(), batch_size, true, 0, false)) {
    auto b = assemble_batch<S>(idx, corpus.features, corpus.targets);
    auto out = run_model(cfg, params, b, {});
    auto l_ctc = ctc_loss(out.ctc_log_probs, out.encoder_lengths, b.targets, Vocabulary::kBlank);
    auto l_s2s = ce_label_smoothed(out.logits, b.decoder_output, b.decoder_keep, label_smoothing);
    const auto [h, n] = token_hits(out.logits, b);
    loss += joint_loss(static_cast<double>(l_ctc.item()), static_cast<double>(l_s2s.item()), alpha) * static_cast<double>(n);
    hits += h;
    ev.tokens += n;
  }
  ev.loss = loss / static_cast<double>(std::max<std::int64_t>(ev.tokens, 1));
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(std::max<std::int64_t>(ev.tokens, 1));
  return ev;
}

enum class TrainMode {
  kJoint,        // joint CTC/attention loss
  kSelfDistill,  // S-KD from scratch, phi ramped per epoch
  kFinetune,     // FS-KD from a checkpoint at fixed phi and rate
};

struct TrainResult {
  std::vector<EpochRecord> records;
  std::vector<std::string> best_checkpoints;  // relative paths, best first
  ParameterStore<float> params;
};

namespace detail {

inline std::string epoch_checkpoint_name(int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoints/epoch%03d.trck", epoch);
  return buf;
}

struct RankedCheckpoint {
  double accuracy, loss;
  int epoch;
  std::string path;
};

inline void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to " + path.string());
}

}  // namespace detail

/// Runs a full training job into `cfg.paths.out`. `init` seeds the student
/// for fine-tuning; otherwise parameters are initialized from train.seed.
inline TrainResult train_model(const ExperimentConfig& cfg_in, TrainMode mode, const Checkpoint* init = nullptr,
                               const std::string& config_name = "train.conf") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = cfg_in;
  const fs::path out_dir = cfg.paths.out;
  if (out_dir.empty()) throw ConfigError("paths.out is required");
  if (cfg.paths.vocab.empty()) throw ConfigError("paths.vocab is required");
  const auto vocab = Vocabulary::load(cfg.paths.vocab);
  cfg.model.vocab_size = vocab.size();
  cfg.model.validate();
  cfg.kd.validate();
  const auto& tc = cfg.train;
  if (tc.alpha < 0.0 || tc.alpha > 1.0) throw ConfigError("train.alpha must be in [0, 1]");
  if (tc.lr_schedule != "noam" && tc.lr_schedule != "constant") throw ConfigError("train.lr_schedule must be noam or constant");
  const int epochs = mode == TrainMode::kFinetune ? cfg.finetune.epochs : tc.epochs;
  if (epochs < 1) throw ConfigError("epoch count must be at least 1");
  if (mode == TrainMode::kSelfDistill) cfg.kd.total_epochs = epochs;
  if (mode == TrainMode::kFinetune) {
    cfg.kd.mode = PhiMode::kFixed;
    cfg.kd.total_epochs = epochs;
  }

  const Corpus train = load_corpus(cfg.paths.train, vocab);
  const Corpus dev = cfg.paths.dev.empty() ? train : load_corpus(cfg.paths.dev, vocab);
  check_corpus_fits(train, cfg.model);
  check_corpus_fits(dev, cfg.model);

  DirectoryLock lock(out_dir);
  fs::create_directories(out_dir / "checkpoints");
  io::write_file_atomic(out_dir / config_name, serialize_config(cfg));
  vocab.save(out_dir / "vocab.txt");
  const auto records_path = out_dir / "epochs.jsonl", timing_path = out_dir / "timing.jsonl";
  fs::remove(records_path);
  fs::remove(timing_path);
  for (const auto& e : fs::directory_iterator(out_dir / "checkpoints")) fs::remove(e.path());

  TrainResult result;
  auto& params = result.params;
  if (init) {
    params = load_model_parameters<float>(*init, cfg.model, true);
  } else {
    params = init_model_parameters<float>(cfg.model, tc.seed);
  }
  AdamState<float> adam;
  if (mode == TrainMode::kFinetune) {
    adam.schedule = LearningRateSchedule::constant(cfg.finetune.lr);
  } else if (tc.lr_schedule == "constant") {
    adam.schedule = LearningRateSchedule::constant(tc.lr);
  } else {
    adam.schedule = LearningRateSchedule::noam(tc.lr_scale, cfg.model.d_att, tc.warmup);
  }

  const Rng run(tc.seed);
  std::vector<detail::RankedCheckpoint> ranked;
  auto emit = [&](const EpochRecord& r) {
    detail::append_line(records_path, r.to_json().dump());
    result.records.push_back(r);
  };

  if (mode == TrainMode::kFinetune) {
    const auto ev = evaluate(cfg.model, params, dev, tc.batch_size, tc.alpha, tc.label_smoothing);
    EpochRecord r;
    r.dev_loss = ev.loss;
    r.dev_accuracy = ev.accuracy;
    emit(r);
  }

  std::optional<ParameterStore<float>> teacher;
  const bool distill = mode != TrainMode::kJoint;
  const int cadence = cfg.kd.teacher_snapshot_cadence;
  auto refresh_teacher = [&](bool at_epoch_start, int epoch) {
    if (!distill) return;
    if (cfg.kd.freeze_teacher) {
      if (!teacher) teacher = snapshot_teacher(params);
      return;
    }
    if (cadence == 0 ? !at_epoch_start : (at_epoch_start && (epoch - 1) % cadence == 0)) {
      teacher = snapshot_teacher(params);
    }
  };

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double phi = distill ? phi_schedule(epoch, cfg.kd) : 0.0;
    refresh_teacher(true, epoch);
    const Rng epoch_rng = run.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
    const auto batches = make_batches(train.frame_lengths(), tc.batch_size, tc.sort_by_length, epoch_rng.derive("order").seed());
    double sum_ctc = 0, sum_s2s = 0, sum_skd = 0, sum_total = 0, sum_entropy = 0;
    std::int64_t tokens = 0;
    for (const auto& idx : batches) {
      refresh_teacher(false, epoch);
      std::vector<FeatureSequence> feats;
      std::vector<std::vector<std::int64_t>> targets;
      std::vector<std::size_t> local;
      for (auto i : idx) {
        FeatureSequence f = train.features[i];
        if (tc.spec_augment) {
          Rng aug = epoch_rng.derive("augment").derive(static_cast<std::uint64_t>(i));
          f = spec_augment(std::move(f), tc.augment, aug);
        }
        local.push_back(feats.size());
        feats.push_back(std::move(f));
        targets.push_back(train.targets[i]);
      }
      auto b = assemble_batch<float>(local, feats, targets);
      b.indices = idx;
      const std::uint64_t step = params.step_count() + 1;
      ForwardContext ctx{true, run.derive("dropout").derive(step).next_u64(), nullptr};
      auto abort_batch = [&](const std::string& reason, const Tensor* l_ctc, const Tensor* l_s2s, const Tensor* l_skd) {
        nlohmann::json dump;
        dump["epoch"] = epoch;
        dump["step"] = step;
        dump["reason"] = reason;
        for (auto i : idx) dump["utterances"].push_back(train.entries[i].id);
        if (l_ctc && l_ctc->defined()) dump["ctc"] = l_ctc->item();
        if (l_s2s && l_s2s->defined()) dump["s2s"] = l_s2s->item();
        if (l_skd && l_skd->defined()) dump["skd"] = l_skd->item();
        io::write_file_atomic(out_dir / "nonfinite_batch.json", dump.dump(2));
        throw NumericError(reason + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                           " (batch starting with " + train.entries[idx.front()].id + "); details in " +
                           (out_dir / "nonfinite_batch.json").string());
      };
      Tensor l_ctc, l_s2s, l_skd, total;
      double entropy = 0.0;
      try {
        auto out = run_model(cfg.model, params, b, ctx);
        // CTC feasibility was checked up front, so a zero-probability target
        // here means the log-probabilities themselves blew up.
        l_ctc = ctc_loss(out.ctc_log_probs, out.encoder_lengths, b.targets, Vocabulary::kBlank);
        l_s2s = ce_label_smoothed(out.logits, b.decoder_output, b.decoder_keep, tc.label_smoothing);
        if (phi > 0.0) {
          Tensor teacher_logits;
          {
            NoGradGuard guard;
            teacher_logits = run_model(cfg.model, *teacher, b, {}).logits;
          }
          entropy = mean_entropy(teacher_logits, b.decoder_keep, cfg.kd.temperature);
          l_skd = skd_loss(teacher_logits, out.logits, b.decoder_keep, cfg.kd.temperature);
        }
        total = finetune_loss(l_ctc, l_s2s, l_skd, tc.alpha, phi);
      } catch (const InfeasibleAlignmentError& e) {
        abort_batch(std::string("non-finite CTC loss (") + e.what() + ")", &l_ctc, &l_s2s, &l_skd);
      } catch (const NumericError& e) {
        abort_batch(std::string("non-finite value (") + e.what() + ")", &l_ctc, &l_s2s, &l_skd);
      }
      if (!std::isfinite(total.item())) abort_batch("non-finite loss", &l_ctc, &l_s2s, &l_skd);
      total.backward();
      for (auto& [name, p] : params) p.grad_mut();  // untouched branches get zero gradient
      adam_step(params, adam);

      const auto n = static_cast<double>(detail::kept_rows(b.decoder_keep));
      sum_ctc += n * l_ctc.item();
      sum_s2s += n * l_s2s.item();
      sum_skd += l_skd.defined() ? n * l_skd.item() : 0.0;
      sum_total += n * total.item();
      sum_entropy += n * entropy;
      tokens += static_cast<std::int64_t>(n);
    }
    const double norm = static_cast<double>(std::max<std::int64_t>(tokens, 1));
    EpochRecord r;
    r.epoch = epoch;
    r.train = LossBreakdown{sum_ctc / norm, sum_s2s / norm, sum_skd / norm, sum_total / norm, tc.alpha, phi};
    if (phi > 0.0) r.teacher_entropy = sum_entropy / norm;
    const auto ev = evaluate(cfg.model, params, dev, tc.batch_size, tc.alpha, tc.label_smoothing);
    r.dev_loss = ev.loss;
    r.dev_accuracy = ev.accuracy;
    r.learning_rate = adam.last_rate;
    r.steps = params.step_count();

    save_checkpoint(out_dir / "last.trck", params);
    if (tc.keep_best > 0) {
      r.checkpoint = detail::epoch_checkpoint_name(epoch);
      save_checkpoint(out_dir / r.checkpoint, params);
      ranked.push_back({ev.accuracy, ev.loss, epoch, r.checkpoint});
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        if (a.loss != b.loss) return a.loss < b.loss;
        return a.epoch > b.epoch;
      });
      while (static_cast<int>(ranked.size()) > tc.keep_best) {
        fs::remove(out_dir / ranked.back().path);
        ranked.pop_back();
      }
    }
    emit(r);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::append_line(timing_path, nlohmann::json{{"epoch", epoch}, {"seconds", seconds}}.dump());
  }
  std::string best;
  for (const auto& c : ranked) {
    result.best_checkpoints.push_back(c.path);
    best += c.path + "\n";
  }
  io::write_file_atomic(out_dir / "best.txt", best);
  return result;
}

}  // namespace trasr
