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

#include "pvt/detector.h"

#include <algorithm>

#include "json.hpp"

namespace pvt {

void DetectorConfig::Validate() const {
  PVT_CHECK(gamma > 0.0 && gamma < 1.0, "detector: gamma must be in (0, 1)");
  PVT_CHECK(smoothing_window >= 1, "detector: smoothing_window must be >= 1");
}

PosteriorTrack SmoothPosteriors(const PosteriorTrack& track, int window) {
  PVT_CHECK(window >= 1, "smoothing window must be >= 1");
  if (window == 1) return track;
  PosteriorTrack out;
  out.posteriors.resize(track.size());
  const auto& y = track.posteriors;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::size_t lo = t + 1 >= static_cast<std::size_t>(window) ? t + 1 - window : 0;
    double acc = 0.0;
    for (std::size_t s = lo; s <= t; ++s) acc += y[s];
    out.posteriors[t] = static_cast<float>(acc / static_cast<double>(t + 1 - lo));
  }
  return out;
}

KeywordLocation EstimateLocation(const PosteriorTrack& track, int64_t keyword_end_frame) {
  PVT_CHECK(track.size() > 0, "estimate_location: empty posterior track");
  const auto& y = track.posteriors;
  KeywordLocation loc;
  loc.middle_frame = std::max_element(y.begin(), y.end()) - y.begin();
  loc.end_frame = keyword_end_frame < 0 ? static_cast<int64_t>(y.size()) - 1 : keyword_end_frame;
  loc.start_frame = std::max<int64_t>(0, 2 * loc.middle_frame - loc.end_frame);
  return loc;
}

TriggerEvent Detect(const PosteriorTrack& track, const DetectorConfig& cfg) {
  cfg.Validate();
  PVT_CHECK(track.size() > 0, "detect: empty posterior track");
  const PosteriorTrack smoothed = SmoothPosteriors(track, cfg.smoothing_window);
  const auto& y = smoothed.posteriors;
  TriggerEvent ev;
  ev.peak_posterior = *std::max_element(y.begin(), y.end());
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] >= cfg.gamma) {
      ev.fired = true;
      ev.fire_frame = static_cast<int64_t>(t);
      break;
    }
  }
  const KeywordLocation loc = EstimateLocation(smoothed);
  ev.start_frame = loc.start_frame;
  ev.middle_frame = loc.middle_frame;
  ev.end_frame = loc.end_frame;
  return ev;
}

AudioBuffer ExtractSegment(const AudioBuffer& audio, int64_t start_frame, int64_t end_frame) {
  const int64_t n = static_cast<int64_t>(audio.samples.size());
  const int64_t frames = (n + kHopSamples - 1) / kHopSamples;
  const int64_t begin = std::min(std::clamp<int64_t>(start_frame, 0, frames) * kHopSamples, n);
  const int64_t end = std::min(std::clamp<int64_t>(end_frame, 0, frames) * kHopSamples, n);
  if (begin >= end) {
    throw ValidationError("extract_segment: empty range [" + std::to_string(start_frame) + ", " +
                          std::to_string(end_frame) + ")");
  }
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.assign(audio.samples.begin() + begin, audio.samples.begin() + end);
  return out;
}

std::string TriggerEventJson(const std::string& utt_id, const TriggerEvent& ev) {
  nlohmann::json j;
  j["utt_id"] = utt_id;
  j["fired"] = ev.fired;
  j["fire_frame"] = ev.fire_frame;
  j["start_frame"] = ev.start_frame;
  j["middle_frame"] = ev.middle_frame;
  j["end_frame"] = ev.end_frame;
  j["peak"] = ev.peak_posterior;
  return j.dump();
}

}  // namespace pvt
