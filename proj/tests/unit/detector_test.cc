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

#include "gtest/gtest.h"
#include "json.hpp"
#include "pvt/detector.h"
#include "testing.h"

namespace pvt {
namespace {

PosteriorTrack Track(std::vector<float> y) { return PosteriorTrack{std::move(y)}; }

TEST(Detect, FiresOnFirstFrameAtThreshold) {
  DetectorConfig cfg;
  cfg.gamma = 0.5;
  const TriggerEvent ev = Detect(Track({0.1f, 0.4f, 0.5f, 0.9f, 0.2f}), cfg);
  EXPECT_TRUE(ev.fired);
  EXPECT_EQ(ev.fire_frame, 2);
  EXPECT_FLOAT_EQ(ev.peak_posterior, 0.9f);
  EXPECT_EQ(ev.middle_frame, 3);
}

TEST(Detect, SilentTrackDoesNotFire) {
  const TriggerEvent ev = Detect(Track(std::vector<float>(50, 0.001f)), DetectorConfig());
  EXPECT_FALSE(ev.fired);
  EXPECT_EQ(ev.fire_frame, -1);
}

TEST(Detect, ThresholdIsMonotone) {
  Rng rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> y(30);
    for (auto& v : y) v = u(rng) * u(rng);
    bool fired_before = true;
    for (double g : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) {
      DetectorConfig cfg;
      cfg.gamma = g;
      const bool fired = Detect(Track(y), cfg).fired;
      // Raising the threshold can only turn a trigger off.
      EXPECT_TRUE(fired_before || !fired);
      fired_before = fired;
    }
  }
}

TEST(Smoothing, CausalMovingAverage) {
  const PosteriorTrack s = SmoothPosteriors(Track({0.0f, 1.0f, 0.5f, 0.0f}), 2);
  EXPECT_EQ(s.posteriors, (std::vector<float>{0.0f, 0.5f, 0.75f, 0.25f}));
  EXPECT_EQ(SmoothPosteriors(Track({0.3f, 0.7f}), 1).posteriors,
            (std::vector<float>{0.3f, 0.7f}));
  // A single spike is damped below the threshold by a window of 4.
  DetectorConfig cfg;
  cfg.gamma = 0.5;
  cfg.smoothing_window = 4;
  EXPECT_FALSE(Detect(Track({0.0f, 0.0f, 0.9f, 0.0f, 0.0f}), cfg).fired);
  EXPECT_THROW(SmoothPosteriors(Track({0.1f}), 0), ValidationError);
}

TEST(Location, MirrorsEndAroundPeak) {
  // Peak at 70, end at 99: start = 2*70 - 99 = 41.
  std::vector<float> y(100, 0.0f);
  y[70] = 0.8f;
  const KeywordLocation loc = EstimateLocation(Track(y));
  EXPECT_EQ(loc.middle_frame, 70);
  EXPECT_EQ(loc.end_frame, 99);
  EXPECT_EQ(loc.start_frame, 41);
  EXPECT_EQ(EstimateLocation(Track(y), 80).start_frame, 60);
  // Peak near the start clips at frame 0.
  y[70] = 0.0f;
  y[10] = 0.8f;
  EXPECT_EQ(EstimateLocation(Track(y)).start_frame, 0);
}

TEST(Segment, FrameRangeToSamples) {
  AudioBuffer a;
  a.samples.resize(1000);
  for (std::size_t i = 0; i < 1000; ++i) a.samples[i] = static_cast<float>(i);
  const AudioBuffer s = ExtractSegment(a, 2, 4);
  ASSERT_EQ(s.samples.size(), 320u);
  EXPECT_EQ(s.samples.front(), 320.0f);
  // Ranges past the end are clipped to the last partial frame.
  EXPECT_EQ(ExtractSegment(a, 5, 100).samples.size(), 200u);
  EXPECT_THROW(ExtractSegment(a, 4, 4), ValidationError);
}

TEST(Events, JsonFields) {
  DetectorConfig cfg;
  cfg.gamma = 0.3;
  const TriggerEvent ev = Detect(Track({0.1f, 0.6f, 0.2f}), cfg);
  const auto j = nlohmann::json::parse(TriggerEventJson("utt7", ev));
  EXPECT_EQ(j.at("utt_id"), "utt7");
  EXPECT_EQ(j.at("fired"), true);
  EXPECT_EQ(j.at("fire_frame"), 1);
  EXPECT_EQ(j.at("start_frame"), 0);
  EXPECT_EQ(j.at("end_frame"), 2);
}

TEST(DetectorConfig, RejectsOutOfRange) {
  DetectorConfig cfg;
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = DetectorConfig();
  cfg.smoothing_window = 0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
}

}  // namespace
}  // namespace pvt
