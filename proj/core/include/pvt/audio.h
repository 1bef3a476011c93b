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

#ifndef PVT_AUDIO_H_
#define PVT_AUDIO_H_

#include <string>
#include <vector>

#include "pvt/common.h"

namespace pvt {

// Mono PCM audio with amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Reads a RIFF/WAVE file. Only 16-bit PCM, mono, 16 kHz is accepted; anything
// else throws WavFormatError naming the offending property, e.g.
// "channels=2, expected mono". Samples are scaled by 1/32768.
AudioBuffer ReadWav(const std::string& path);

// Writes 16-bit PCM mono. Samples are clipped to [-1, 1 - 2^-15].
void WriteWav(const std::string& path, const AudioBuffer& audio);

// Parses an in-memory WAV image; used by ReadWav and by tests.
AudioBuffer ParseWav(const std::vector<char>& bytes);

}  // namespace pvt

#endif  // PVT_AUDIO_H_
