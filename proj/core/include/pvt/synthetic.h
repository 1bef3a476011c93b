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

#ifndef PVT_SYNTHETIC_H_
#define PVT_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pvt/audio.h"
#include "pvt/eval.h"
#include "pvt/kws_data.h"

namespace pvt {

// Toy corpus for tests and demos. Each speaker is a harmonic source with its
// own pitch and resonances; "speech" is that source with a syllable-rate
// envelope, and the keyword is a fixed sequence of tones laid over the
// speaker's source.
struct SyntheticSpeaker {
  std::string id;
  double f0 = 120.0;
  std::vector<double> formants;  // Hz
  std::vector<double> bandwidths;
};

struct SyntheticConfig {
  int n_speakers = 8;
  std::vector<double> keyword_tones = {500.0, 1500.0, 1000.0, 2500.0};
  double tone_seconds = 0.2;  // keyword = 80 frames, longer than the 40-frame target window
  double filler_min_s = 0.5;
  double filler_max_s = 1.0;
  double tail_s = 0.05;  // silence after the keyword
  double noise_db = -35.0;  // white noise level relative to full scale
  uint64_t seed = 7;
};

SyntheticSpeaker MakeSyntheticSpeaker(int index, uint64_t seed);

struct SyntheticUtterance {
  AudioBuffer audio;
  bool has_keyword = false;
  double keyword_start_s = 0.0;
  double keyword_end_s = 0.0;
};

// Babble of the given duration for a speaker.
AudioBuffer SynthesizeFiller(const SyntheticSpeaker& spk, double seconds, Rng* rng);
// The keyword spoken by spk.
AudioBuffer SynthesizeKeyword(const SyntheticSpeaker& spk, const SyntheticConfig& cfg, Rng* rng);
// Filler (+ keyword at the end when with_keyword) + tail, plus noise.
SyntheticUtterance SynthesizeUtterance(const SyntheticSpeaker& spk, bool with_keyword,
                                       const SyntheticConfig& cfg, Rng* rng);

// Utterance counts per speaker for each split of the generated corpus.
struct SyntheticLayout {
  int train_pos = 6;
  int train_neg = 6;
  int enroll = 2;
  int dev_pos = 3;
  int dev_neg = 3;
  int eval_pos = 3;
  int eval_neg = 3;
};

// Writes wavs under dir/wav and the files
//   train.jsonl enroll.jsonl dev.jsonl eval.jsonl dev_trials.txt eval_trials.txt
// Every test utterance is tried against every enrolled speaker; targets are
// keyword utterances of the enrolled speaker.
struct SyntheticCorpusFiles {
  std::string train_manifest;
  std::string enroll_manifest;
  std::string dev_manifest;
  std::string eval_manifest;
  std::string dev_trials;
  std::string eval_trials;
};

SyntheticCorpusFiles GenerateSyntheticCorpus(const std::string& dir, const SyntheticConfig& cfg,
                                             const SyntheticLayout& layout);

}  // namespace pvt

#endif  // PVT_SYNTHETIC_H_
