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

#ifndef PVT_PIPELINE_H_
#define PVT_PIPELINE_H_

#include <map>
#include <string>
#include <vector>

#include "pvt/audio.h"
#include "pvt/config.h"
#include "pvt/detector.h"
#include "pvt/eval.h"
#include "pvt/features.h"
#include "pvt/kws_data.h"
#include "pvt/mdtc.h"
#include "pvt/sv_model.h"
#include "pvt/sv_train.h"

namespace pvt {

// Models loaded from checkpoints carry the feature setup they were trained
// with; the model is rebuilt from the config stored in the checkpoint.
struct KwsSystem {
  FbankConfig features;
  MdtcModel<float> model;
};

struct SvSystem {
  FbankConfig features;
  SvModel<float> model;
};

void SaveKwsCheckpoint(const std::string& path, const FbankConfig& features,
                       MdtcModel<float>* model);
KwsSystem LoadKwsCheckpoint(const std::string& path);

// The number of training classes is stored as an attribute so the classifier
// can be rebuilt with the right shape.
void SaveSvCheckpoint(const std::string& path, const FbankConfig& features,
                      SvModel<float>* model);
SvSystem LoadSvCheckpoint(const std::string& path);

// Segments shorter than this are extended to the left before embedding; the
// extractor needs a few frames to survive its strides.
inline constexpr int64_t kMinSegmentFrames = 40;

// Audio of frames [start_frame, end_frame) after the minimum-length
// extension; end_frame is clipped to the audio.
AudioBuffer SegmentAudio(const AudioBuffer& audio, int64_t start_frame, int64_t end_frame);

// Class labels follow the sorted speaker ids. With copies > 0 every
// utterance also gets that many noisy / reverberant copies. With
// keyword_only, only positive utterances are used, cut to their annotated
// keyword span (the fine-tuning data).
std::vector<SvExample> BuildSvExamples(const std::vector<ManifestEntry>& entries,
                                       const FbankConfig& features,
                                       const SvAugmentConfig& augment, Rng* rng,
                                       std::vector<std::string>* speakers = nullptr,
                                       bool keyword_only = false);

// Detector, one or two speaker systems and the decision parameters.
struct Verifier {
  KwsSystem kws;
  std::vector<SvSystem> sv;
  DetectorConfig detector;
};

Verifier LoadVerifier(const RunConfig& cfg);

struct UtteranceResult {
  TriggerEvent event;
  // One embedding per speaker system; empty when the detector did not fire.
  std::vector<Embedding> embeddings;
};

// KWS on the whole utterance, then SV on the estimated keyword segment,
// whose end is the utterance end.
UtteranceResult ProcessUtterance(const Verifier& v, const AudioBuffer& audio);

// Embedding of [start_frame, end_frame) after the minimum-length extension.
Embedding EmbedSegment(const SvSystem& sv, const AudioBuffer& audio, int64_t start_frame,
                       int64_t end_frame);

// Profiles per system, keyed by speaker. Positive enrollment utterances use
// their annotated keyword span, others the whole utterance.
using ProfileSet = std::map<std::string, EnrollmentProfile>;
std::vector<ProfileSet> EnrollSpeakers(const Verifier& v,
                                       const std::vector<ManifestEntry>& entries);

// Worker count: requested if > 0, else hardware threads. A positive
// PVT_THREADS caps a requested count and replaces the hardware default.
int ResolveThreads(int requested);

// Runs every test utterance once (in parallel over utterances) and scores
// each trial against its enrolled profile. Scores of two systems are fused.
// A trial naming an unknown test utterance or speaker is a ValidationError.
std::vector<ScoredTrial> ScoreTrials(const Verifier& v, const std::vector<ProfileSet>& profiles,
                                     const std::vector<ManifestEntry>& tests,
                                     const std::vector<Trial>& trials, int threads);

struct RtfResult {
  double audio_seconds = 0.0;
  double kws_seconds = 0.0;
  double sv_seconds = 0.0;
  double kws_rtf = 0.0;
  double sv_normalized_rtf = 0.0;
};

// Single-threaded wall-clock timing of both stages over the given audio.
RtfResult MeasureRtf(const Verifier& v, const std::vector<AudioBuffer>& audio);

}  // namespace pvt

#endif  // PVT_PIPELINE_H_
