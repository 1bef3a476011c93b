// Copyright (c) 2026 The PVT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gtest/gtest.h"
#include "pvt/kws_data.h"
#include "testing.h"

namespace pvt {
namespace {

AudioBuffer Ramp(std::size_t n, float offset = 0.0f) {
  AudioBuffer a;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = offset + 1e-4f * static_cast<float>(i % 997);
  return a;
}

double Power(const std::vector<float>& x) {
  double s = 0.0;
  for (float v : x) s += static_cast<double>(v) * v;
  return s / static_cast<double>(x.size());
}

std::vector<int64_t> OnFrames(const std::vector<int8_t>& targets) {
  std::vector<int64_t> on;
  for (std::size_t t = 0; t < targets.size(); ++t)
    if (targets[t] == 1) on.push_back(static_cast<int64_t>(t));
  return on;
}

TEST(Labels, CenteredWindowOfForty) {
  std::vector<int8_t> tg;
  std::vector<float> w;
  LabelFrames(200, true, 60, 140, &tg, &w);
  const auto on = OnFrames(tg);
  ASSERT_EQ(on.size(), 40u);
  EXPECT_EQ(on.front(), 80);
  EXPECT_EQ(on.back(), 119);
  for (std::size_t t = 0; t < 200; ++t) {
    const bool inside = t >= 80 && t < 120;
    EXPECT_EQ(w[t], inside ? 1.0f : 0.0f) << t;
    if (!inside) EXPECT_EQ(tg[t], kTargetAmbiguous);
  }
}

TEST(Labels, WindowClippedToKeyword) {
  std::vector<int8_t> tg;
  std::vector<float> w;
  LabelFrames(100, true, 0, 20, &tg, &w);
  const auto on = OnFrames(tg);
  ASSERT_EQ(on.size(), 20u);
  EXPECT_EQ(on.front(), 0);
  EXPECT_EQ(on.back(), 19);
}

TEST(Labels, NegativeIsAllZeroWithFullWeight) {
  std::vector<int8_t> tg;
  std::vector<float> w;
  LabelFrames(37, false, 0, 0, &tg, &w);
  EXPECT_EQ(tg, std::vector<int8_t>(37, 0));
  EXPECT_EQ(w, std::vector<float>(37, 1.0f));
}

TEST(Labels, SpanOutsideUtteranceRejected) {
  std::vector<int8_t> tg;
  std::vector<float> w;
  EXPECT_THROW(LabelFrames(50, true, 80, 120, &tg, &w), ValidationError);
  EXPECT_THROW(LabelFrames(50, true, 10, 10, &tg, &w), ValidationError);
}

TEST(Labels, SecondsRoundToNearestFrame) {
  EXPECT_EQ(SecondsToFrame(0.6), 60);
  EXPECT_EQ(SecondsToFrame(0.026), 3);
  EXPECT_EQ(SecondsToFrame(0.0149), 1);
  EXPECT_EQ(SecondsToFrame(0.0), 0);
}

TEST(Compose, FillerShiftsKeywordSpan) {
  const AudioBuffer kw = Ramp(8000, 0.5f);
  const AudioBuffer before = Ramp(8000);
  const ComposedUtterance c = ComposeUtterance(kw, 2, &before, nullptr);
  EXPECT_EQ(c.kw_begin, 8000);
  EXPECT_EQ(c.kw_end, 16000);
  EXPECT_EQ(SecondsToFrame(c.keyword_start_s()), 50);
  EXPECT_EQ(SecondsToFrame(c.keyword_end_s()), 100);
  EXPECT_EQ(c.audio.samples.size(), 16000u);
  EXPECT_EQ(c.audio.samples[8000], kw.samples[0]);
  const ComposedUtterance solo = ComposeUtterance(kw, 1, nullptr, nullptr);
  EXPECT_EQ(solo.kw_begin, 0);
  EXPECT_EQ(solo.audio.samples, kw.samples);
}

TEST(Compose, NegativeCutsAtKeywordMidpoint) {
  const AudioBuffer kw = Ramp(16000, 0.5f), a = Ramp(16000), b = Ramp(16000, -0.5f);
  const ComposedUtterance v3 = ComposeUtterance(kw, 3, &a, &b);
  EXPECT_EQ(v3.keyword_mid_frame(), 150);
  const auto [left, right] = BuildNegativeCuts(v3);
  EXPECT_EQ(left.samples.size(), 24000u);
  EXPECT_EQ(right.samples.size(), 24000u);
  std::vector<float> joined = left.samples;
  joined.insert(joined.end(), right.samples.begin(), right.samples.end());
  EXPECT_EQ(joined, v3.audio.samples);
}

TEST(Compose, VariantsAndEmptyPool) {
  Rng rng(1);
  const AudioBuffer kw = Ramp(4000);
  EXPECT_THROW(BuildPositiveVariants(kw, {}, &rng), ValidationError);
  const auto v = BuildPositiveVariants(kw, {Ramp(3000), Ramp(5000)}, &rng);
  ASSERT_EQ(v.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(v[i].variant, i + 1);
    EXPECT_EQ(v[i].kw_end - v[i].kw_begin, 4000);
  }
  EXPECT_EQ(v[0].kw_begin, 0);
  EXPECT_GT(v[1].kw_begin, 0);
  EXPECT_EQ(v[1].kw_end, static_cast<int64_t>(v[1].audio.samples.size()));
  EXPECT_LT(v[2].kw_end, static_cast<int64_t>(v[2].audio.samples.size()));
}

TEST(SpecAugment, MasksStayInRangeAndZero) {
  Rng rng(2);
  AugmentConfig cfg;
  cfg.n_time_masks = 2;
  cfg.n_freq_masks = 2;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 5 + trial % 40;
    for (const SpecMask& m : SampleSpecMasks(frames, 80, cfg, &rng)) {
      const int64_t axis = m.time ? static_cast<int64_t>(frames) : 80;
      EXPECT_GE(m.start, 0);
      EXPECT_LE(m.length, m.time ? cfg.time_mask_max : cfg.freq_mask_max);
      EXPECT_LE(m.start + m.length, axis);
    }
  }
  FeatureMatrix f(10, 6, 1.0f);
  ApplySpecMasks({{true, 2, 3}, {false, 4, 1}}, &f);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t d = 0; d < 6; ++d) {
      const bool masked = (t >= 2 && t < 5) || d == 4;
      EXPECT_EQ(f(t, d), masked ? 0.0f : 1.0f);
    }
  EXPECT_THROW(ApplySpecMasks({{true, 8, 3}}, &f), ValidationError);
}

TEST(Noise, MixHitsRequestedSnr) {
  Rng rng(3);
  std::normal_distribution<float> g(0.0f, 1.0f);
  AudioBuffer speech, noise;
  for (int i = 0; i < 16000; ++i) speech.samples.push_back(0.3f * g(rng));
  for (int i = 0; i < 7000; ++i) noise.samples.push_back(g(rng));
  for (double snr : {0.0, 5.0, 20.0}) {
    const AudioBuffer mixed = MixNoiseSnr(speech, noise, snr);
    std::vector<float> added(mixed.samples.size());
    for (std::size_t i = 0; i < added.size(); ++i) added[i] = mixed.samples[i] - speech.samples[i];
    const double got = 10.0 * std::log10(Power(speech.samples) / Power(added));
    EXPECT_NEAR(got, snr, 0.01) << snr;
  }
  // Equal-power noise at 0 dB is added at unit scale.
  const AudioBuffer m0 = MixNoiseSnr(speech, speech, 0.0);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(m0.samples[i], 2 * speech.samples[i], 1e-6);
  // Silent noise leaves the speech untouched.
  AudioBuffer silent;
  silent.samples.assign(100, 0.0f);
  EXPECT_EQ(MixNoiseSnr(speech, silent, 10.0).samples, speech.samples);
}

TEST(Reverb, DelayAndTwoTapOracle) {
  const AudioBuffer x = Ramp(50, 0.1f);
  AudioBuffer delay;
  delay.samples = {0.0f, 0.0f, 1.0f};
  const AudioBuffer y = ConvolveRir(x, delay);
  EXPECT_EQ(y.samples[0], 0.0f);
  EXPECT_EQ(y.samples[1], 0.0f);
  // The output is rescaled to the input peak; the delay drops x[48], x[49].
  const double delay_gain = static_cast<double>(x.samples[49]) / x.samples[47];
  for (std::size_t i = 2; i < 50; ++i) EXPECT_NEAR(y.samples[i], x.samples[i - 2] * delay_gain, 1e-6);

  AudioBuffer taps;
  taps.samples = {1.0f, 0.5f};
  const AudioBuffer z = ConvolveRir(x, taps);
  std::vector<double> ref(50);
  double peak = 0, peak_x = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    ref[i] = x.samples[i] + (i ? 0.5 * x.samples[i - 1] : 0.0);
    peak = std::max(peak, std::fabs(ref[i]));
    peak_x = std::max(peak_x, std::fabs(static_cast<double>(x.samples[i])));
  }
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(z.samples[i], ref[i] * peak_x / peak, 1e-6);
  EXPECT_THROW(ConvolveRir(Ramp(2), Ramp(5)), ValidationError);
}

LabeledExample Example(const std::string& id, std::size_t frames) {
  LabeledExample ex;
  ex.utt_id = id;
  ex.features = FeatureMatrix(frames, 3, 1.0f);
  LabelFrames(frames, false, 0, 0, &ex.targets, &ex.weights);
  return ex;
}

TEST(Batching, PartitionCoversEveryExampleOnce) {
  std::vector<LabeledExample> exs;
  for (int i = 0; i < 10; ++i) exs.push_back(Example("u" + std::to_string(i), 5 + i));
  Rng rng(4);
  BatchIterator it(exs, 3, &rng);
  EXPECT_EQ(it.num_batches(), 4u);
  std::vector<std::size_t> sizes;
  std::multiset<std::size_t> seen;
  KwsBatch b;
  while (it.Next(&b)) {
    sizes.push_back(b.indices.size());
    seen.insert(b.indices.begin(), b.indices.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 1}));
  EXPECT_EQ(seen.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(Batching, PaddingCarriesZeroWeight) {
  std::vector<LabeledExample> exs = {Example("a", 4), Example("b", 7)};
  const KwsBatch b = MakeBatch(exs, {0, 1});
  ASSERT_EQ(b.feats.shape(), (Shape{2, 3, 7}));
  for (int64_t t = 0; t < 7; ++t) {
    EXPECT_EQ(b.weights[t], t < 4 ? 1.0f : 0.0f);
    EXPECT_EQ(b.feats[t], t < 4 ? 1.0f : 0.0f);
    EXPECT_EQ(b.weights[7 + t], 1.0f);
  }
}

TEST(Manifest, ParseFormatRoundTrip) {
  const ManifestEntry e = ParseManifestLine(
      R"({"utt_id":"u1","wav_path":"a.wav","speaker_id":"s1","label":"positive",)"
      R"("keyword_start_s":0.25,"keyword_end_s":0.75})");
  EXPECT_TRUE(e.positive());
  EXPECT_EQ(e.speaker_id, "s1");
  EXPECT_DOUBLE_EQ(e.keyword_end_s, 0.75);
  const ManifestEntry back = ParseManifestLine(FormatManifestLine(e));
  EXPECT_EQ(back.utt_id, e.utt_id);
  EXPECT_EQ(back.keyword_start_s, e.keyword_start_s);
}

TEST(Manifest, InvalidLinesRejected) {
  EXPECT_THROW(ParseManifestLine("{not json"), ValidationError);
  EXPECT_THROW(ParseManifestLine(R"({"utt_id":"u","wav_path":"a","label":"maybe"})"),
               ValidationError);
  EXPECT_THROW(ParseManifestLine(R"({"utt_id":"u","wav_path":"a","label":"positive"})"),
               ValidationError);
  EXPECT_THROW(ParseManifestLine(R"({"utt_id":"u","wav_path":"a","label":"positive",)"
                                 R"("keyword_start_s":0.5,"keyword_end_s":0.5})"),
               ValidationError);
}

TEST(Manifest, RelativeWavPathsResolveAgainstManifestDir) {
  testing::TempDir dir("manifest");
  {
    std::ofstream f(dir.file("m.jsonl"));
    f << R"({"utt_id":"u","wav_path":"x/a.wav","label":"negative"})" << "\n\n";
  }
  const auto entries = ReadManifest(dir.file("m.jsonl"));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].wav_path, dir.file("x/a.wav"));
}

}  // namespace
}  // namespace pvt
