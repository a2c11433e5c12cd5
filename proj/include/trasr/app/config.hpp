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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trasr/core/binary_io.hpp"
#include "trasr/data/synth.hpp"
#include "trasr/frontend/spec_augment.hpp"
#include "trasr/model/config.hpp"
#include "trasr/model/lm.hpp"
#include "trasr/objectives/losses.hpp"
#include "trasr/search/beam_search.hpp"

namespace trasr {

struct TrainConfig {
  int epochs = 150;
  std::int64_t batch_size = 32;
  double alpha = 0.3;  // CTC weight of the joint loss
  double label_smoothing = 0.1;
  std::string lr_schedule = "noam";  // noam | constant
  double lr_scale = 5.0;
  std::int64_t warmup = 25000;
  double lr = 1e-4;  // constant schedule only
  std::uint64_t seed = 1;
  bool spec_augment = true;
  SpecAugmentConfig augment;
  int keep_best = 5;
  bool sort_by_length = true;
};

struct FinetuneConfig {
  int epochs = 50;
  double lr = 1e-4;
};

struct LmTrainConfig {
  int epochs = 20;
  std::int64_t batch_size = 32;
  double lr_scale = 1.0;
  std::int64_t warmup = 1000;
};

struct BenchmarkConfig {
  std::vector<std::int64_t> lengths{200, 400, 800};
  int repetitions = 10;
};

struct SynthConfig {
  SyntheticTaskSpec task;
  std::int64_t train_utterances = 50;
  std::int64_t dev_utterances = 0;
  std::int64_t min_tokens = 4;
  std::int64_t max_tokens = 8;
};

struct PathsConfig {
  std::string train;  // manifests
  std::string dev;
  std::string vocab;
  std::string out = "exp";
  std::string init_checkpoint;  // finetune-skd
  std::string lm_checkpoint;    // decode with gamma > 0
};

/// Everything a command needs. Paths in a config file are resolved against
/// the file's directory.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  KDConfig kd;
  FinetuneConfig finetune;
  BeamConfig decode;
  LmConfig lm;
  LmTrainConfig lm_train;
  BenchmarkConfig benchmark;
  SynthConfig synth;
  PathsConfig paths;
  std::string decode_mode = "beam";  // beam | greedy

  ExperimentConfig() {
    kd.mode = PhiMode::kLinear;
    kd.total_epochs = train.epochs;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": '" + v + "' is not a valid number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename T>
std::string format_number(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  } else {
    return std::to_string(v);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream in(v);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

}  // namespace detail

/// Key table of an ExperimentConfig: every settable key with its accessors.
class ConfigSchema {
 public:
  struct Key {
    std::string name;
    std::string doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
    bool is_path = false;
  };

  ConfigSchema() { build(); }

  const std::vector<Key>& keys() const { return keys_; }

  const Key& find(const std::string& name) const {
    for (const auto& k : keys_) {
      if (k.name == name) return k;
    }
    throw ConfigError("unknown config key '" + name + "'");
  }

 private:
  template <typename T, typename Ref>
  void number(const std::string& name, Ref ref, std::string doc) {
    keys_.push_back({name, std::move(doc),
                     [name, ref](ExperimentConfig& c, const std::string& v) { ref(c) = detail::parse_number<T>(name, v); },
                     [ref](const ExperimentConfig& c) { return detail::format_number<T>(ref(const_cast<ExperimentConfig&>(c))); }});
  }
  template <typename Ref>
  void flag(const std::string& name, Ref ref, std::string doc) {
    keys_.push_back({name, std::move(doc),
                     [name, ref](ExperimentConfig& c, const std::string& v) { ref(c) = detail::parse_bool(name, v); },
                     [ref](const ExperimentConfig& c) { return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }});
  }
  template <typename Ref>
  void text(const std::string& name, Ref ref, std::string doc, bool is_path = false) {
    keys_.push_back({name, std::move(doc), [ref](ExperimentConfig& c, const std::string& v) { ref(c) = v; },
                     [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)); }, is_path});
  }

  void build();

  std::vector<Key> keys_;
};

inline void ConfigSchema::build() {
  using C = ExperimentConfig;
  number<int>("model.e1", [](C& c) -> int& { return c.model.e1; }, "encoder layers before time reduction");
  number<int>("model.e2", [](C& c) -> int& { return c.model.e2; }, "encoder layers after time reduction");
  number<int>("model.decoder_layers", [](C& c) -> int& { return c.model.d; }, "decoder layers");
  number<std::int64_t>("model.d_att", [](C& c) -> std::int64_t& { return c.model.d_att; }, "model width");
  number<std::int64_t>("model.d_ff", [](C& c) -> std::int64_t& { return c.model.d_ff; }, "feed-forward width");
  number<std::int64_t>("model.heads", [](C& c) -> std::int64_t& { return c.model.heads; }, "attention heads");
  flag("model.time_reduction", [](C& c) -> bool& { return c.model.tr_enabled; }, "insert one time-reduction layer after e1 layers");
  flag("model.pyramidal", [](C& c) -> bool& { return c.model.pyramidal; }, "halve after each of the first three layers");
  flag("model.pre_norm", [](C& c) -> bool& { return c.model.pre_norm; }, "layer norm before each sublayer");
  number<double>("model.dropout", [](C& c) -> double& { return c.model.dropout_rate; }, "dropout rate");
  number<std::int64_t>("model.feature_dim", [](C& c) -> std::int64_t& { return c.model.frontend.feature_dim; }, "input feature bins");
  keys_.push_back({"model.frontend", "conv2d4 | conv2d8 | vggconv2d4 | vggconv2d8 | identity",
                   [](C& c, const std::string& v) { c.model.frontend.kind = parse_frontend_kind(v); },
                   [](const C& c) { return std::string(to_string(c.model.frontend.kind)); }});
  keys_.push_back({"model.frontend_channels", "channels per front-end stage; empty for the default",
                   [](C& c, const std::string& v) { c.model.frontend.channels = detail::parse_list<std::int64_t>("model.frontend_channels", v); },
                   [](const C& c) { return detail::format_list(c.model.frontend.channels); }});
  keys_.push_back({"model.positional_encoding", "auto | true | false",
                   [](C& c, const std::string& v) {
                     if (v == "auto") {
                       c.model.frontend.positional_encoding.reset();
                     } else {
                       c.model.frontend.positional_encoding = detail::parse_bool("model.positional_encoding", v);
                     }
                   },
                   [](const C& c) {
                     const auto& p = c.model.frontend.positional_encoding;
                     return std::string(!p ? "auto" : *p ? "true" : "false");
                   }});

  number<int>("train.epochs", [](C& c) -> int& { return c.train.epochs; }, "training epochs");
  number<std::int64_t>("train.batch_size", [](C& c) -> std::int64_t& { return c.train.batch_size; }, "utterances per batch");
  number<double>("train.alpha", [](C& c) -> double& { return c.train.alpha; }, "CTC weight of the joint loss");
  number<double>("train.label_smoothing", [](C& c) -> double& { return c.train.label_smoothing; }, "decoder label smoothing");
  text("train.lr_schedule", [](C& c) -> std::string& { return c.train.lr_schedule; }, "noam | constant");
  number<double>("train.lr_scale", [](C& c) -> double& { return c.train.lr_scale; }, "noam scale");
  number<std::int64_t>("train.warmup", [](C& c) -> std::int64_t& { return c.train.warmup; }, "noam warmup steps");
  number<double>("train.lr", [](C& c) -> double& { return c.train.lr; }, "constant learning rate");
  number<std::uint64_t>("train.seed", [](C& c) -> std::uint64_t& { return c.train.seed; }, "run seed");
  flag("train.spec_augment", [](C& c) -> bool& { return c.train.spec_augment; }, "SpecAugment on training batches");
  number<int>("train.freq_masks", [](C& c) -> int& { return c.train.augment.n_freq_masks; }, "SpecAugment frequency masks");
  number<std::int64_t>("train.max_freq_width", [](C& c) -> std::int64_t& { return c.train.augment.max_freq_width; }, "widest frequency mask");
  number<int>("train.time_masks", [](C& c) -> int& { return c.train.augment.n_time_masks; }, "SpecAugment time masks");
  number<std::int64_t>("train.max_time_width", [](C& c) -> std::int64_t& { return c.train.augment.max_time_width; }, "widest time mask");
  number<int>("train.keep_best", [](C& c) -> int& { return c.train.keep_best; }, "checkpoints kept by dev accuracy");
  flag("train.sort_by_length", [](C& c) -> bool& { return c.train.sort_by_length; }, "length-bucketed batches");

  number<double>("kd.phi", [](C& c) -> double& { return c.kd.phi_final; }, "final (or fixed) distillation weight");
  keys_.push_back({"kd.mode", "linear | fixed",
                   [](C& c, const std::string& v) {
                     if (v == "linear") {
                       c.kd.mode = PhiMode::kLinear;
                     } else if (v == "fixed") {
                       c.kd.mode = PhiMode::kFixed;
                     } else {
                       throw ConfigError("kd.mode: expected linear or fixed, got '" + v + "'");
                     }
                   },
                   [](const C& c) { return std::string(c.kd.mode == PhiMode::kLinear ? "linear" : "fixed"); }});
  number<int>("kd.cadence", [](C& c) -> int& { return c.kd.teacher_snapshot_cadence; }, "epochs between teacher snapshots; 0 = every step");
  flag("kd.freeze_teacher", [](C& c) -> bool& { return c.kd.freeze_teacher; }, "keep the first teacher for the whole run");
  number<double>("kd.temperature", [](C& c) -> double& { return c.kd.temperature; }, "distillation temperature");

  number<int>("finetune.epochs", [](C& c) -> int& { return c.finetune.epochs; }, "FS-KD epochs");
  number<double>("finetune.lr", [](C& c) -> double& { return c.finetune.lr; }, "FS-KD fixed learning rate");

  number<int>("decode.beam", [](C& c) -> int& { return c.decode.beam_size; }, "beam size");
  number<double>("decode.ctc_weight", [](C& c) -> double& { return c.decode.lambda; }, "CTC score weight");
  number<double>("decode.lm_weight", [](C& c) -> double& { return c.decode.gamma; }, "LM score weight");
  number<double>("decode.penalty", [](C& c) -> double& { return c.decode.insertion_penalty; }, "per-token insertion bonus");
  number<double>("decode.max_len_ratio", [](C& c) -> double& { return c.decode.max_len_ratio; }, "length budget per encoder frame");
  number<std::int64_t>("decode.max_length", [](C& c) -> std::int64_t& { return c.decode.max_length; }, "fixed length budget when > 0");
  text("decode.mode", [](C& c) -> std::string& { return c.decode_mode; }, "beam | greedy");

  number<int>("lm.layers", [](C& c) -> int& { return c.lm.layers; }, "LM layers");
  number<std::int64_t>("lm.d_att", [](C& c) -> std::int64_t& { return c.lm.d_att; }, "LM width");
  number<std::int64_t>("lm.d_ff", [](C& c) -> std::int64_t& { return c.lm.d_ff; }, "LM feed-forward width");
  number<std::int64_t>("lm.heads", [](C& c) -> std::int64_t& { return c.lm.heads; }, "LM heads");
  number<double>("lm.dropout", [](C& c) -> double& { return c.lm.dropout_rate; }, "LM dropout");
  number<int>("lm.epochs", [](C& c) -> int& { return c.lm_train.epochs; }, "LM epochs");
  number<std::int64_t>("lm.batch_size", [](C& c) -> std::int64_t& { return c.lm_train.batch_size; }, "LM sentences per batch");
  number<double>("lm.lr_scale", [](C& c) -> double& { return c.lm_train.lr_scale; }, "LM noam scale");
  number<std::int64_t>("lm.warmup", [](C& c) -> std::int64_t& { return c.lm_train.warmup; }, "LM noam warmup");

  keys_.push_back({"benchmark.lengths", "input lengths to profile",
                   [](C& c, const std::string& v) { c.benchmark.lengths = detail::parse_list<std::int64_t>("benchmark.lengths", v); },
                   [](const C& c) { return detail::format_list(c.benchmark.lengths); }});
  number<int>("benchmark.repetitions", [](C& c) -> int& { return c.benchmark.repetitions; }, "timed forward passes per cell");

  text("synth.alphabet", [](C& c) -> std::string& { return c.synth.task.alphabet; }, "symbols; a space separates words");
  number<std::int64_t>("synth.min_frames_per_token", [](C& c) -> std::int64_t& { return c.synth.task.min_frames_per_token; }, "shortest token");
  number<std::int64_t>("synth.max_frames_per_token", [](C& c) -> std::int64_t& { return c.synth.task.max_frames_per_token; }, "longest token");
  number<std::uint64_t>("synth.template_seed", [](C& c) -> std::uint64_t& { return c.synth.task.template_seed; }, "template seed");
  number<double>("synth.noise", [](C& c) -> double& { return c.synth.task.noise_stddev; }, "Gaussian noise stddev");
  number<double>("synth.min_distance", [](C& c) -> double& { return c.synth.task.min_template_distance; }, "minimum template distance");
  number<std::int64_t>("synth.train_utterances", [](C& c) -> std::int64_t& { return c.synth.train_utterances; }, "training utterances");
  number<std::int64_t>("synth.dev_utterances", [](C& c) -> std::int64_t& { return c.synth.dev_utterances; }, "dev utterances; 0 reuses train");
  number<std::int64_t>("synth.min_tokens", [](C& c) -> std::int64_t& { return c.synth.min_tokens; }, "shortest transcript");
  number<std::int64_t>("synth.max_tokens", [](C& c) -> std::int64_t& { return c.synth.max_tokens; }, "longest transcript");

  text("paths.train", [](C& c) -> std::string& { return c.paths.train; }, "training manifest", true);
  text("paths.dev", [](C& c) -> std::string& { return c.paths.dev; }, "dev manifest", true);
  text("paths.vocab", [](C& c) -> std::string& { return c.paths.vocab; }, "vocabulary file", true);
  text("paths.out", [](C& c) -> std::string& { return c.paths.out; }, "output directory", true);
  text("paths.init_checkpoint", [](C& c) -> std::string& { return c.paths.init_checkpoint; }, "FS-KD starting point", true);
  text("paths.lm_checkpoint", [](C& c) -> std::string& { return c.paths.lm_checkpoint; }, "LM for shallow fusion", true);
}

inline const ConfigSchema& config_schema() {
  static const ConfigSchema s;
  return s;
}

/// Applies `key = value`; relative paths are taken from `base`, or the
/// working directory when `base` is empty.
inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                             const std::filesystem::path& base = {}) {
  const auto& k = config_schema().find(key);
  if (k.is_path && !value.empty()) {
    // Stored absolute so the resolved config reloads from any directory.
    const std::filesystem::path p(value);
    k.set(cfg, std::filesystem::absolute(p.is_relative() ? base / p : p).lexically_normal().string());
  } else {
    k.set(cfg, value);
  }
}

inline void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& source,
                              const std::filesystem::path& base = {}) {
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'section.key = value'");
    try {
      set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), base);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw ConfigError("config file '" + path.string() + "' not found");
  ExperimentConfig cfg;
  const auto bytes = io::read_file(path);
  apply_config_text(cfg, std::string(bytes.begin(), bytes.end()), path.string(), path.parent_path());
  return cfg;
}

/// Every key with its resolved value, one per line, in schema order.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : config_schema().keys()) {
    const auto s = k.name.substr(0, k.name.find('.'));
    if (s != section) {
      out += (section.empty() ? "" : "\n");
      section = s;
    }
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

/// One-line doc per key, for `--help-config`.
inline std::string describe_config(const ExperimentConfig& defaults = {}) {
  std::string out;
  for (const auto& k : config_schema().keys()) out += k.name + " = " + k.get(defaults) + "  # " + k.doc + "\n";
  return out;
}

}  // namespace trasr
