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
#include <cstring>
#include <numeric>
#include <filesystem>
#include <fstream>

#include "fuzz.hpp"
#include "oracles.hpp"
#include "trasr/data/batching.hpp"
#include "trasr/data/features.hpp"
#include "trasr/data/manifest.hpp"
#include "trasr/data/metrics.hpp"
#include "trasr/data/synth.hpp"
#include "trasr/data/vocab.hpp"

namespace trasr {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("trasr_test_data_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Runs `parse` on 1000 mutations; only trasr::Error may escape.
template <typename Parse>
int fuzz(const std::vector<char>& good, Parse parse, std::uint64_t seed) {
  const auto out = testing::fuzz_format(good, parse, seed);
  for (const auto& e : out.escaped) ADD_FAILURE() << e;
  return out.rejected;
}

TEST(Vocabulary, ReservedIdsAndRoundTrip) {
  Vocabulary v(std::vector<char32_t>{U'a', U'b', U' '});
  EXPECT_EQ(v.size(), 8);
  EXPECT_EQ(v.tokenize("ab"), (std::vector<std::int64_t>{5, 6}));
  EXPECT_TRUE(v.tokenize("").empty());
  EXPECT_EQ(v.detokenize(v.tokenize("ab ba")), "ab ba");
  EXPECT_EQ(v.detokenize({Vocabulary::kSos, 5, Vocabulary::kEos, Vocabulary::kBlank, Vocabulary::kPad}), "a");
}

TEST(Vocabulary, OutOfVocabularyBecomesUnk) {
  auto v = Vocabulary::from_texts({"ab"});
  EXPECT_EQ(v.tokenize("azb"), (std::vector<std::int64_t>{5, Vocabulary::kUnk, 6}));
  EXPECT_EQ(v.detokenize(v.tokenize("azb")), "a\xEF\xBF\xBD" "b");
  EXPECT_THROW(v.detokenize({99}), Error);
  EXPECT_THROW(v.detokenize({-1}), Error);
}

TEST(Vocabulary, MultibyteCharacters) {
  auto v = Vocabulary::from_texts({"h\xC3\xA9llo \xE2\x82\xAC"});
  const std::string s = "\xE2\x82\xAC h\xC3\xA9";
  EXPECT_EQ(v.detokenize(v.tokenize(s)), s);
  EXPECT_THROW(v.tokenize("\xC3"), Error);
}

TEST(Vocabulary, FileRoundTripAndFuzz) {
  auto v = Vocabulary::from_texts({"the quick brown fox \xC3\xA9"});
  auto d = scratch_dir("vocab");
  v.save(d / "v.txt");
  EXPECT_EQ(Vocabulary::load(d / "v.txt"), v);
  auto s = v.serialize();
  const std::vector<char> good(s.begin(), s.end());
  fuzz(good, [](const std::vector<char>& b) { Vocabulary::parse(std::string(b.begin(), b.end()), "fuzz"); }, 11);
}

TEST(Features, RoundTripIsBitIdentical) {
  Rng rng(3);
  std::vector<float> v(7 * 5);
  for (auto& e : v) e = static_cast<float>(rng.normal());
  v[3] = -0.0f;
  v[4] = 1e-40f;  // subnormal
  FeatureSequence x(7, 5, v);
  auto d = scratch_dir("features");
  save_features(d / "x.trft", x);
  auto y = load_features(d / "x.trft");
  ASSERT_EQ(y.length, 7);
  ASSERT_EQ(y.dim, 5);
  EXPECT_EQ(std::memcmp(y.values.data(), v.data(), v.size() * sizeof(float)), 0);
  EXPECT_EQ(fs::file_size(d / "x.trft"), 16u + 7 * 5 * 4);
}

TEST(Features, EmptySequenceRejectedAtSave) {
  FeatureSequence x(0, 4, {});
  EXPECT_THROW(encode_features(x), Error);
}

TEST(Features, TruncationReportsOffset) {
  FeatureSequence x(2, 2, {1, 2, 3, 4});
  auto b = encode_features(x);
  b.resize(b.size() - 3);
  try {
    decode_features(b, "t.trft");
    FAIL() << "truncated file accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 16u);
  }
  auto bad_magic = encode_features(x);
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_features(bad_magic, "m"), FormatError);
  auto nan = encode_features(x);
  nan[16] = nan[17] = '\0';
  nan[18] = static_cast<char>(0xc0);
  nan[19] = 0x7f;
  EXPECT_THROW(decode_features(nan, "n"), FormatError);
  auto trailing = encode_features(x);
  trailing.push_back(0);
  EXPECT_THROW(decode_features(trailing, "t"), FormatError);
}

TEST(Features, FuzzNeverCrashes) {
  Rng rng(5);
  std::vector<float> v(6 * 3);
  for (auto& e : v) e = static_cast<float>(rng.normal());
  const auto good = encode_features(FeatureSequence(6, 3, v));
  const int rejected = fuzz(good, [](const std::vector<char>& b) { decode_features(b, "fuzz"); }, 12);
  EXPECT_GT(rejected, 500);
}

TEST(Manifest, ParsesRelativePathsAndRejectsDuplicates) {
  auto d = scratch_dir("manifest");
  save_features(d / "a.trft", FeatureSequence(1, 1, {1}));
  const std::string text = "u1\ta.trft\thello world\nu2\t" + (d / "a.trft").string() + "\tx\n";
  auto m = parse_manifest(text, d / "m.tsv");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].feature_path, d / "a.trft");
  EXPECT_EQ(m[0].transcript, "hello world");
  EXPECT_THROW(parse_manifest("u1\ta.trft\tx\nu1\ta.trft\ty\n", d / "m.tsv"), FormatError);
  EXPECT_THROW(parse_manifest("u1\ta.trft\n", d / "m.tsv"), FormatError);
  EXPECT_THROW(parse_manifest("u1\tmissing.trft\tx\n", d / "m.tsv"), IoError);
  save_manifest(d / "copy.tsv", m);
  auto again = load_manifest(d / "copy.tsv");
  ASSERT_EQ(again.size(), 2u);
  EXPECT_EQ(fs::weakly_canonical(again[1].feature_path), fs::weakly_canonical(d / "a.trft"));
}

TEST(Manifest, FuzzNeverCrashes) {
  const std::string text = "u1\ta.trft\thello\nu2\tb.trft\tworld\n";
  fuzz({text.begin(), text.end()},
       [](const std::vector<char>& b) { parse_manifest(std::string(b.begin(), b.end()), "m.tsv", false); }, 13);
}

TEST(Synth, NoiselessFeaturesEqualTemplates) {
  SyntheticTaskSpec spec;
  spec.feature_dim = 6;
  spec.noise_stddev = 0.0;
  spec.min_frames_per_token = spec.max_frames_per_token = 3;
  const auto templates = synth_templates(spec);
  Rng rng(9);
  auto u = synth_utterance(spec, templates, 5, rng);
  ASSERT_EQ(u.features.length, 15);
  for (std::int64_t t = 0; t < 15; ++t) {
    for (std::int64_t f = 0; f < 6; ++f) {
      EXPECT_EQ(u.features.at(t, f), templates[u.symbols[static_cast<std::size_t>(t / 3)]][static_cast<std::size_t>(f)]);
    }
  }
}

TEST(Synth, TemplatesAreSeparated) {
  SyntheticTaskSpec spec;
  spec.feature_dim = 8;
  spec.min_template_distance = 3.0;
  const auto t = synth_templates(spec);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      double d = 0;
      for (std::size_t f = 0; f < 8; ++f) d += (t[i][f] - t[j][f]) * (t[i][f] - t[j][f]);
      EXPECT_GE(std::sqrt(d), 3.0);
    }
  }
}

TEST(Synth, LengthBoundsAndTranscriptShape) {
  SyntheticTaskSpec spec;
  spec.feature_dim = 4;
  const auto templates = synth_templates(spec);
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const auto k = rng.uniform_int(1, 12);
    auto u = synth_utterance(spec, templates, k, rng);
    EXPECT_GE(u.features.length, 4 * k);
    EXPECT_LE(u.features.length, 8 * k);
    EXPECT_EQ(static_cast<std::int64_t>(u.transcript.size()), k);
    EXPECT_NE(u.transcript.front(), ' ');
    EXPECT_NE(u.transcript.back(), ' ');
    for (std::size_t c = 1; c < u.transcript.size(); ++c) EXPECT_NE(u.transcript[c], u.transcript[c - 1]);
  }
}

TEST(Synth, SameSeedGivesByteIdenticalDataset) {
  SyntheticTaskSpec spec;
  spec.feature_dim = 5;
  auto a = synth_generate(spec, 6, 2, 6, 42, scratch_dir("synth_a"));
  auto b = synth_generate(spec, 6, 2, 6, 42, scratch_dir("synth_b"));
  EXPECT_EQ(io::read_file(a.manifest), io::read_file(b.manifest));
  EXPECT_EQ(io::read_file(a.vocabulary), io::read_file(b.vocabulary));
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(io::read_file(a.entries[i].feature_path), io::read_file(b.entries[i].feature_path));
  }
  auto m = load_manifest(a.manifest);
  ASSERT_EQ(m.size(), 6u);
  auto v = Vocabulary::load(a.vocabulary);
  for (const auto& e : m) EXPECT_EQ(v.detokenize(v.tokenize(e.transcript)), e.transcript);
}

// Softmax regression on frames must separate the templates.
TEST(Synth, LinearFrameClassifierLearnsTask) {
  SyntheticTaskSpec spec;
  spec.feature_dim = 16;
  spec.noise_stddev = 0.1;
  const auto templates = synth_templates(spec);
  const auto C = static_cast<std::int64_t>(templates.size());
  const std::int64_t F = spec.feature_dim;
  Rng rng(23);
  std::vector<SyntheticUtterance> train, test;
  for (int i = 0; i < 20; ++i) train.push_back(synth_utterance(spec, templates, 8, rng));
  for (int i = 0; i < 10; ++i) test.push_back(synth_utterance(spec, templates, 8, rng));
  std::vector<double> W(static_cast<std::size_t>((F + 1) * C), 0.0);
  auto logits = [&](const FeatureSequence& x, std::int64_t t) {
    std::vector<double> z(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c) {
      double s = W[static_cast<std::size_t>(F * C + c)];
      for (std::int64_t f = 0; f < F; ++f) s += x.at(t, f) * W[static_cast<std::size_t>(f * C + c)];
      z[static_cast<std::size_t>(c)] = s;
    }
    return z;
  };
  for (int epoch = 0; epoch < 30; ++epoch) {
    for (const auto& u : train) {
      for (std::int64_t t = 0; t < u.features.length; ++t) {
        auto z = logits(u.features, t);
        const double m = *std::max_element(z.begin(), z.end());
        double norm = 0;
        for (auto& e : z) norm += (e = std::exp(e - m));
        for (std::int64_t c = 0; c < C; ++c) {
          const double g = z[static_cast<std::size_t>(c)] / norm - (c == u.frame_labels[static_cast<std::size_t>(t)]);
          for (std::int64_t f = 0; f < F; ++f) W[static_cast<std::size_t>(f * C + c)] -= 0.05 * g * u.features.at(t, f);
          W[static_cast<std::size_t>(F * C + c)] -= 0.05 * g;
        }
      }
    }
  }
  std::int64_t right = 0, total = 0;
  for (const auto& u : test) {
    for (std::int64_t t = 0; t < u.features.length; ++t, ++total) {
      auto z = logits(u.features, t);
      right += std::max_element(z.begin(), z.end()) - z.begin() == u.frame_labels[static_cast<std::size_t>(t)];
    }
  }
  EXPECT_GE(static_cast<double>(right) / static_cast<double>(total), 0.95);
}

TEST(Batching, SingletonBatchesHaveNoPadding) {
  const std::vector<std::int64_t> len{5, 9, 3, 7};
  auto batches = make_batches(len, 1, true, 1);
  ASSERT_EQ(batches.size(), 4u);
  std::vector<FeatureSequence> feats;
  std::vector<std::vector<std::int64_t>> targets;
  for (auto l : len) {
    feats.emplace_back(l, 2, std::vector<float>(static_cast<std::size_t>(2 * l), 1.0f));
    targets.push_back(std::vector<std::int64_t>(static_cast<std::size_t>(l / 2), 5));
  }
  for (const auto& b : batches) {
    auto batch = assemble_batch<float>(b, feats, targets);
    EXPECT_EQ(batch.features.dim(1), batch.feature_lengths[0]);
    for (auto k : batch.decoder_keep) EXPECT_EQ(k, 1);
  }
}

TEST(Batching, PadsToLongestAndMasksTrueLengths) {
  std::vector<FeatureSequence> feats{FeatureSequence(5, 1, std::vector<float>(5, 1.f)),
                                     FeatureSequence(9, 1, std::vector<float>(9, 1.f))};
  std::vector<std::vector<std::int64_t>> targets{{5, 6}, {7}};
  auto b = assemble_batch<float>({0, 1}, feats, targets);
  EXPECT_EQ(b.features.shape(), (Shape{2, 9, 1}));
  EXPECT_EQ(b.feature_lengths, (std::vector<std::int64_t>{5, 9}));
  double mass0 = 0, mass1 = 0;
  for (std::int64_t t = 0; t < 9; ++t) {
    mass0 += b.features.values()[static_cast<std::size_t>(t)];
    mass1 += b.features.values()[static_cast<std::size_t>(9 + t)];
  }
  EXPECT_EQ(mass0, 5);
  EXPECT_EQ(mass1, 9);
  EXPECT_EQ(b.decoder_input, (std::vector<std::int64_t>{2, 5, 6, 2, 7, 4}));
  EXPECT_EQ(b.decoder_output, (std::vector<std::int64_t>{5, 6, 3, 7, 3, 4}));
  EXPECT_EQ(b.decoder_keep, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0}));
}

TEST(Batching, ConservesFramesAndIsDeterministic) {
  Rng rng(4);
  std::vector<std::int64_t> len(37);
  for (auto& l : len) l = rng.uniform_int(1, 50);
  auto a = make_batches(len, 8, true, 99), b = make_batches(len, 8, true, 99), c = make_batches(len, 8, true, 100);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::int64_t total = 0, padded_sorted = 0, padded_unsorted = 0;
  std::vector<int> seen(len.size(), 0);
  for (const auto& batch : a) {
    std::int64_t mx = 0;
    for (auto i : batch) {
      total += len[i];
      ++seen[i];
      mx = std::max(mx, len[i]);
    }
    padded_sorted += mx * static_cast<std::int64_t>(batch.size());
  }
  for (const auto& batch : make_batches(len, 8, false, 99)) {
    std::int64_t mx = 0;
    for (auto i : batch) mx = std::max(mx, len[i]);
    padded_unsorted += mx * static_cast<std::int64_t>(batch.size());
  }
  EXPECT_EQ(total, std::accumulate(len.begin(), len.end(), std::int64_t{0}));
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_LE(padded_sorted, padded_unsorted);
  EXPECT_THROW(make_batches({}, 2, true, 0), Error);
  EXPECT_THROW(make_batches(len, 0, true, 0), ConfigError);
}

TEST(Metrics, WordErrorExamples) {
  EXPECT_EQ(word_errors("the cat sat", "the cat sat").errors(), 0);
  auto del = word_errors("the cat sat", "the cat");
  EXPECT_EQ(del.deletions, 1);
  EXPECT_EQ(del.errors(), 1);
  EXPECT_NEAR(del.rate(), 1.0 / 3.0, 1e-12);
  auto swap = word_errors("a b", "b a");
  EXPECT_EQ(swap.errors(), 2);
  EXPECT_DOUBLE_EQ(swap.rate(), 1.0);
  EXPECT_EQ(word_errors("", "x").insertions, 1);
  EXPECT_DOUBLE_EQ(word_errors("", "x").rate(), 1.0);
  auto cer = char_errors("ab cd", "abcx");
  EXPECT_EQ(cer.reference_length, 4);
  EXPECT_EQ(cer.substitutions, 1);
}

TEST(Metrics, EditDistanceIsAMetric) {
  Rng rng(31);
  auto random_seq = [&] {
    std::vector<std::int64_t> s(static_cast<std::size_t>(rng.uniform_int(0, 7)));
    for (auto& c : s) c = rng.uniform_int(0, 3);
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    auto x = random_seq(), y = random_seq(), z = random_seq();
    const auto dxy = edit_distance(x, y).errors(), dyx = edit_distance(y, x).errors();
    EXPECT_EQ(edit_distance(x, x).errors(), 0);
    EXPECT_EQ(dxy, dyx);
    EXPECT_LE(edit_distance(x, z).errors(), dxy + edit_distance(y, z).errors());
    EXPECT_EQ(dxy, static_cast<std::int64_t>(oracle::levenshtein(x, y)));
    auto c = edit_distance(x, y);
    EXPECT_EQ(c.reference_length - c.deletions - c.substitutions + c.insertions + c.substitutions,
              static_cast<std::int64_t>(y.size()));
  }
}

}  // namespace
}  // namespace trasr
