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

#ifndef PVT_DETECTOR_H_
#define PVT_DETECTOR_H_

#include <cstdint>
#include <string>

#include "pvt/audio.h"
#include "pvt/mdtc.h"

namespace pvt {

struct DetectorConfig {
  double gamma = 0.01;       // trigger threshold in (0, 1)
  int smoothing_window = 1;  // causal moving average in frames; 1 is off

  void Validate() const;
};

struct TriggerEvent {
  bool fired = false;
  int64_t fire_frame = -1;  // first t with y_t >= gamma; -1 when not fired
  int64_t start_frame = 0;
  int64_t middle_frame = 0;
  int64_t end_frame = 0;
  double peak_posterior = 0.0;
};

// Causal moving average over the last window frames (fewer at the start).
PosteriorTrack SmoothPosteriors(const PosteriorTrack& track, int window);

// Fires when the (smoothed) track reaches gamma. The keyword location is
// filled in for every event, fired or not.
TriggerEvent Detect(const PosteriorTrack& track, const DetectorConfig& cfg);

struct KeywordLocation {
  int64_t start_frame = 0;
  int64_t middle_frame = 0;
  int64_t end_frame = 0;
};

// middle = earliest argmax of the track, start = max(0, 2 * middle - end).
// keyword_end_frame < 0 selects the last frame of the track.
KeywordLocation EstimateLocation(const PosteriorTrack& track, int64_t keyword_end_frame = -1);

// Samples [start * 160, end * 160) clipped to the buffer.
AudioBuffer ExtractSegment(const AudioBuffer& audio, int64_t start_frame, int64_t end_frame);

std::string TriggerEventJson(const std::string& utt_id, const TriggerEvent& ev);

}  // namespace pvt

#endif  // PVT_DETECTOR_H_
