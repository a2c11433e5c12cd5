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

#include <string>
#include <vector>

#include "trasr/app/config.hpp"
#include "trasr/app/corpus.hpp"
#include "trasr/data/metrics.hpp"
#include "trasr/model/asr_model.hpp"
#include "trasr/search/beam_search.hpp"
#include "trasr/search/scorers.hpp"

namespace trasr {

struct DecodedUtterance {
  std::string id;
  std::string text;
  std::vector<std::int64_t> tokens;
  double score = 0.0;
  bool finished = true;
};

struct DecodeReport {
  std::vector<DecodedUtterance> utterances;
  EditCounts words, chars;
  double score_sum = 0.0;
};

/// Greedy mode is a one-wide beam over decoder scores alone.
inline BeamConfig effective_beam(const ExperimentConfig& cfg) {
  BeamConfig b = cfg.decode;
  if (cfg.decode_mode == "greedy") {
    b.beam_size = 1;
    b.lambda = 0.0;
    b.gamma = 0.0;
    b.insertion_penalty = 0.0;
  } else if (cfg.decode_mode != "beam") {
    throw ConfigError("decode.mode must be beam or greedy, got '" + cfg.decode_mode + "'");
  }
  b.sos = Vocabulary::kSos;
  b.eos = Vocabulary::kEos;
  b.blank = Vocabulary::kBlank;
  b.excluded = {Vocabulary::kUnk, Vocabulary::kPad};
  return b;
}

/// `lm_params` may be null; it is then an error for the LM weight to be
/// non-zero. An LM that is present with weight zero is never queried.
template <typename S>
DecodeReport decode_corpus(const ModelConfig& model, const ParameterStore<S>& params, const Corpus& corpus,
                           const Vocabulary& vocab, const BeamConfig& beam, const LmConfig* lm_cfg = nullptr,
                           const ParameterStore<S>* lm_params = nullptr) {
  beam.validate();
  if (beam.gamma > 0.0 && !(lm_cfg && lm_params)) {
    throw ConfigError("decode.lm_weight is non-zero but no LM checkpoint was given (paths.lm_checkpoint)");
  }
  PrefixScorer lm;
  if (beam.gamma > 0.0) lm = make_lm_scorer(*lm_cfg, *lm_params, model.vocab_size);
  DecodeReport rep;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& f = corpus.features[i];
    EncoderOutput<S> enc;
    BasicTensor<S> lp;
    {
      NoGradGuard guard;
      auto x = BasicTensor<S>::from_data({1, f.length, f.dim}, std::vector<S>(f.values.begin(), f.values.begin() + f.length * f.dim));
      enc = encode(x, {f.length}, model, params);
      lp = ctc_log_probs(enc.x, params);
    }
    const auto frames = enc.lengths[0];
    SearchInputs in;
    in.decoder = make_decoder_scorer(model, params, DecoderMemory<S>{enc.x, enc.lengths});
    std::optional<CtcPrefixScorer> ctc;
    if (beam.lambda > 0.0) {
      ctc = make_ctc_scorer(lp, frames, Vocabulary::kBlank);
      in.ctc = &*ctc;
    }
    in.lm = lm;
    in.frames = frames;
    const auto r = beam_search(in, beam);
    DecodedUtterance u{corpus.entries[i].id, "", r.best.body(), r.best.score, r.finished};
    u.text = vocab.detokenize(u.tokens);
    rep.words += word_errors(corpus.entries[i].transcript, u.text);
    rep.chars += char_errors(corpus.entries[i].transcript, u.text);
    rep.score_sum += u.score;
    rep.utterances.push_back(std::move(u));
  }
  return rep;
}

inline std::string hypothesis_tsv(const DecodeReport& rep) {
  std::string s;
  for (const auto& u : rep.utterances) s += u.id + "\t" + u.text + "\n";
  return s;
}

}  // namespace trasr
