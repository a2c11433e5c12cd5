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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trasr/app/benchmark.hpp"
#include "trasr/app/config.hpp"
#include "trasr/app/decoding.hpp"
#include "trasr/app/lm_training.hpp"
#include "trasr/app/trainer.hpp"

namespace trasr {

namespace fs = std::filesystem;

namespace detail {

inline fs::path require_out(const ExperimentConfig& cfg) {
  if (cfg.paths.out.empty()) throw ConfigError("paths.out is required");
  fs::create_directories(cfg.paths.out);
  return cfg.paths.out;
}

inline void write_resolved(const ExperimentConfig& cfg, const fs::path& out, const std::string& verb) {
  io::write_file_atomic(out / (verb + ".conf"), serialize_config(cfg));
}

inline Vocabulary load_vocab(const ExperimentConfig& cfg) {
  if (cfg.paths.vocab.empty()) throw ConfigError("paths.vocab is required");
  return Vocabulary::load(cfg.paths.vocab);
}

inline LmConfig resolved_lm(const ExperimentConfig& cfg, std::int64_t vocab_size) {
  LmConfig lm = cfg.lm;
  lm.vocab_size = vocab_size;
  lm.validate();
  return lm;
}

}  // namespace detail

inline TrainResult cmd_train(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  auto r = train_model(cfg, TrainMode::kJoint, nullptr, "train.conf");
  log << "trained " << r.records.size() << " epochs; best: " << (r.best_checkpoints.empty() ? "-" : r.best_checkpoints[0]) << "\n";
  return r;
}

inline TrainResult cmd_train_skd(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  auto r = train_model(cfg, TrainMode::kSelfDistill, nullptr, "train-skd.conf");
  log << "trained " << r.records.size() << " epochs with self-distillation\n";
  return r;
}

inline TrainResult cmd_finetune_skd(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  if (cfg.paths.init_checkpoint.empty()) throw ConfigError("finetune-skd needs paths.init_checkpoint (or --init)");
  const auto ck = load_checkpoint(cfg.paths.init_checkpoint);
  auto r = train_model(cfg, TrainMode::kFinetune, &ck, "finetune-skd.conf");
  log << "fine-tuned " << cfg.finetune.epochs << " epochs from " << cfg.paths.init_checkpoint << "\n";
  return r;
}

/// Writes hyp.tsv and report.json into paths.out.
inline DecodeReport cmd_decode(ExperimentConfig cfg, const fs::path& checkpoint, const fs::path& manifest,
                               std::ostream& log = std::cout) {
  const auto vocab = detail::load_vocab(cfg);
  cfg.model.vocab_size = vocab.size();
  cfg.model.validate();
  const auto beam = effective_beam(cfg);
  if (beam.gamma > 0.0 && cfg.paths.lm_checkpoint.empty()) {
    throw ConfigError("decode.lm_weight is " + detail::format_number(beam.gamma) + " but no LM checkpoint was given");
  }
  const auto params = load_model_parameters<float>(load_checkpoint(checkpoint), cfg.model, false);
  std::optional<LmConfig> lm_cfg;
  std::optional<ParameterStore<float>> lm_params;
  if (!cfg.paths.lm_checkpoint.empty()) {
    lm_cfg = detail::resolved_lm(cfg, vocab.size());
    const auto ck = load_checkpoint(cfg.paths.lm_checkpoint);
    check_architecture(ck, lm_parameter_specs(*lm_cfg));
    lm_params = to_parameter_store<float>(ck, false);
  }
  const auto corpus = load_corpus(manifest, vocab);
  const auto out = detail::require_out(cfg);
  detail::write_resolved(cfg, out, "decode");
  auto rep = decode_corpus(cfg.model, params, corpus, vocab, beam, lm_cfg ? &*lm_cfg : nullptr,
                           lm_params ? &*lm_params : nullptr);
  io::write_file_atomic(out / "hyp.tsv", hypothesis_tsv(rep));
  auto counts = [](const EditCounts& c) {
    return nlohmann::json{{"errors", c.errors()}, {"substitutions", c.substitutions}, {"insertions", c.insertions},
                          {"deletions", c.deletions}, {"reference", c.reference_length}, {"rate", c.rate()}};
  };
  nlohmann::json report{{"utterances", rep.utterances.size()}, {"wer", counts(rep.words)},
                        {"cer", counts(rep.chars)}, {"score_sum", rep.score_sum}};
  io::write_file_atomic(out / "report.json", report.dump(2) + "\n");
  char line[256];
  std::snprintf(line, sizeof line, "WER %.2f%% (S=%lld I=%lld D=%lld N=%lld)  CER %.2f%% (S=%lld I=%lld D=%lld N=%lld)\n",
                100 * rep.words.rate(), static_cast<long long>(rep.words.substitutions),
                static_cast<long long>(rep.words.insertions), static_cast<long long>(rep.words.deletions),
                static_cast<long long>(rep.words.reference_length), 100 * rep.chars.rate(),
                static_cast<long long>(rep.chars.substitutions), static_cast<long long>(rep.chars.insertions),
                static_cast<long long>(rep.chars.deletions), static_cast<long long>(rep.chars.reference_length));
  log << line;
  return rep;
}

/// Checkpoint paths listed in a training run's best.txt, best first.
inline std::vector<fs::path> best_checkpoints(const fs::path& run_dir) {
  std::ifstream in(run_dir / "best.txt");
  if (!in) throw IoError("cannot read " + (run_dir / "best.txt").string());
  std::vector<fs::path> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(run_dir / line);
  }
  if (out.empty()) throw Error("run " + run_dir.string() + " kept no checkpoints");
  return out;
}

/// Writes the mean checkpoint to `output` and its sources to `output`.json.
inline Checkpoint cmd_average(const std::vector<fs::path>& inputs, const fs::path& output, std::ostream& log = std::cout) {
  if (inputs.empty()) throw ConfigError("average needs at least one checkpoint");
  std::vector<Checkpoint> cks;
  for (const auto& p : inputs) cks.push_back(load_checkpoint(p));
  auto avg = average_checkpoints(cks);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  save_checkpoint(output, avg);
  nlohmann::json meta;
  for (const auto& p : inputs) meta["sources"].push_back(p.string());
  io::write_file_atomic(output.string() + ".json", meta.dump(2) + "\n");
  log << "averaged " << inputs.size() << " checkpoints into " << output.string() << "\n";
  return avg;
}

inline std::vector<std::string> read_text_lines(const fs::path& path) {
  const auto bytes = io::read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

/// Trains on `text` lines when given, otherwise on the training manifest's
/// transcripts. Writes lm.trck and lm_epochs.jsonl.
inline ParameterStore<float> cmd_train_lm(const ExperimentConfig& cfg, const fs::path& text = {},
                                          std::ostream& log = std::cout) {
  const auto vocab = detail::load_vocab(cfg);
  const auto lm = detail::resolved_lm(cfg, vocab.size());
  std::vector<std::string> lines;
  if (!text.empty()) {
    lines = read_text_lines(text);
  } else {
    if (cfg.paths.train.empty()) throw ConfigError("train-lm needs --text or paths.train");
    for (const auto& e : load_manifest(cfg.paths.train, false)) lines.push_back(e.transcript);
  }
  if (lines.empty()) throw Error("no transcripts to train the LM on");
  std::vector<std::vector<std::int64_t>> sentences;
  for (const auto& l : lines) sentences.push_back(vocab.tokenize(l));
  const auto out = detail::require_out(cfg);
  DirectoryLock lock(out);
  detail::write_resolved(cfg, out, "train-lm");
  auto params = init_lm_parameters<float>(lm, cfg.train.seed);
  const auto epochs = train_lm(lm, cfg.lm_train, cfg.train.seed, sentences, params);
  std::string records;
  for (const auto& e : epochs) {
    records += nlohmann::json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"perplexity", e.perplexity}}.dump() + "\n";
  }
  io::write_file_atomic(out / "lm_epochs.jsonl", records);
  save_checkpoint(out / "lm.trck", params);
  log << "LM perplexity " << epochs.back().perplexity << " after " << epochs.size() << " epochs\n";
  return params;
}

/// Writes benchmark.csv and benchmark.txt. Throws when any analytic count
/// disagrees with the counted forward pass.
inline std::vector<BenchmarkCell> cmd_benchmark(ExperimentConfig cfg, std::ostream& log = std::cout) {
  cfg.model.vocab_size = std::max<std::int64_t>(cfg.model.vocab_size, Vocabulary::kReserved + 1);
  if (!cfg.paths.vocab.empty()) cfg.model.vocab_size = detail::load_vocab(cfg).size();
  if (cfg.benchmark.lengths.empty()) throw ConfigError("benchmark.lengths is empty");
  if (cfg.benchmark.repetitions < 0) throw ConfigError("benchmark.repetitions must be non-negative");
  const auto out = detail::require_out(cfg);
  detail::write_resolved(cfg, out, "benchmark");
  auto cells = run_benchmark<float>(cfg.model, cfg.benchmark.lengths, cfg.benchmark.repetitions, cfg.train.seed);
  const auto table = benchmark_table(cells);
  io::write_file_atomic(out / "benchmark.csv", benchmark_csv(cells));
  io::write_file_atomic(out / "benchmark.txt", table);
  log << table;
  for (const auto& c : cells) {
    if (!c.records_match) throw Error("analytic and measured attention MACs differ for length " + std::to_string(c.length));
  }
  return cells;
}

inline SyntheticDataset cmd_synth_data(ExperimentConfig cfg, std::ostream& log = std::cout) {
  const auto out = detail::require_out(cfg);
  cfg.synth.task.feature_dim = cfg.model.frontend.feature_dim;
  detail::write_resolved(cfg, out, "synth-data");
  const auto& s = cfg.synth;
  auto train = synth_generate(s.task, s.train_utterances, s.min_tokens, s.max_tokens, cfg.train.seed, out, "train");
  if (s.dev_utterances > 0) synth_generate(s.task, s.dev_utterances, s.min_tokens, s.max_tokens, cfg.train.seed, out, "dev");
  log << "wrote " << s.train_utterances << " training utterances to " << train.manifest.string() << "\n";
  return train;
}

}  // namespace trasr
