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

#include <CLI11.hpp>

#include <iostream>

#include "trasr/app/commands.hpp"

namespace {

using trasr::ExperimentConfig;

enum ExitCode { kOk = 0, kConfigError = 2, kRuntimeError = 3 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "config file (section.key = value lines)");
  cmd->add_option("--seed", o.seed, "overrides train.seed");
  cmd->add_option("--out", o.out, "overrides paths.out");
  cmd->add_option("--set", o.overrides, "extra key=value override, repeatable");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : trasr::load_config(o.config);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw trasr::ConfigError("--set expects key=value, got '" + kv + "'");
    trasr::set_config_value(cfg, trasr::detail::trim(kv.substr(0, eq)), trasr::detail::trim(kv.substr(eq + 1)));
  }
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.out.empty()) trasr::set_config_value(cfg, "paths.out", o.out);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trasr: speech recognition with time-reduction layers and self-distillation"};
  app.require_subcommand(1);
  bool help_config = false;
  app.add_flag("--help-config", help_config, "list every config key with its default");

  CommonOptions common;
  std::string init, checkpoint, manifest, lm, output, best_dir, text;
  std::vector<std::string> inputs;
  std::vector<std::int64_t> lengths;

  auto* train = app.add_subcommand("train", "joint CTC/attention training");
  auto* skd = app.add_subcommand("train-skd", "self-distillation from scratch");
  auto* finetune = app.add_subcommand("finetune-skd", "fine-tune a checkpoint with self-distillation");
  auto* decode = app.add_subcommand("decode", "beam-search a manifest and score it");
  auto* average = app.add_subcommand("average", "average checkpoints");
  auto* train_lm = app.add_subcommand("train-lm", "train the decoder-only language model");
  auto* bench = app.add_subcommand("benchmark", "attention cost across encoder layouts");
  auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset");
  for (auto* c : {train, skd, finetune, decode, train_lm, bench, synth}) add_common(c, common);
  finetune->add_option("--init", init, "checkpoint to start from (overrides paths.init_checkpoint)");
  decode->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  decode->add_option("--manifest", manifest, "manifest to decode (default: paths.dev, then paths.train)");
  decode->add_option("--lm", lm, "LM checkpoint (overrides paths.lm_checkpoint)");
  average->add_option("inputs", inputs, "checkpoints to average");
  average->add_option("--best", best_dir, "average the kept checkpoints of this run directory");
  average->add_option("--output", output, "averaged checkpoint path")->required();
  train_lm->add_option("--text", text, "one sentence per line (default: paths.train transcripts)");
  bench->add_option("--lengths", lengths, "input lengths (overrides benchmark.lengths)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    if (help_config) {
      std::cout << trasr::describe_config();
      return kOk;
    }
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (help_config) {
      std::cout << trasr::describe_config();
      return kOk;
    }
    app.exit(e);
    return kConfigError;
  }

  try {
    if (average->parsed()) {
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      if (!best_dir.empty()) {
        for (auto& p : trasr::best_checkpoints(best_dir)) paths.push_back(p);
      }
      trasr::cmd_average(paths, output);
      return kOk;
    }
    auto cfg = resolve(common);
    if (train->parsed()) {
      trasr::cmd_train(cfg);
    } else if (skd->parsed()) {
      trasr::cmd_train_skd(cfg);
    } else if (finetune->parsed()) {
      if (!init.empty()) trasr::set_config_value(cfg, "paths.init_checkpoint", init);
      trasr::cmd_finetune_skd(cfg);
    } else if (decode->parsed()) {
      if (!lm.empty()) trasr::set_config_value(cfg, "paths.lm_checkpoint", lm);
      if (manifest.empty()) manifest = cfg.paths.dev.empty() ? cfg.paths.train : cfg.paths.dev;
      if (manifest.empty()) throw trasr::ConfigError("decode needs --manifest or paths.dev/paths.train");
      trasr::cmd_decode(cfg, checkpoint, manifest);
    } else if (train_lm->parsed()) {
      trasr::cmd_train_lm(cfg, text);
    } else if (bench->parsed()) {
      if (!lengths.empty()) cfg.benchmark.lengths = lengths;
      trasr::cmd_benchmark(cfg);
    } else if (synth->parsed()) {
      trasr::cmd_synth_data(cfg);
    }
  } catch (const trasr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
