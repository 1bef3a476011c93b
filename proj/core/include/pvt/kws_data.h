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

#ifndef PVT_KWS_DATA_H_
#define PVT_KWS_DATA_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pvt/audio.h"
#include "pvt/features.h"
#include "pvt/tensor.h"

namespace pvt {

enum class UttLabel { kPositive, kNegative };

// One line of a JSON-Lines manifest:
//   {"utt_id": ..., "wav_path": ..., "speaker_id": ..., "label": "positive",
//    "keyword_start_s": 1.2, "keyword_end_s": 1.9}
// Keyword times are required iff label is positive.
struct ManifestEntry {
  std::string utt_id;
  std::string wav_path;
  std::string speaker_id;
  UttLabel label = UttLabel::kNegative;
  double keyword_start_s = 0.0;
  double keyword_end_s = 0.0;

  bool positive() const { return label == UttLabel::kPositive; }
  // Throws ValidationError; duration < 0 skips the upper-bound check.
  void Validate(double duration_s = -1.0) const;
};

ManifestEntry ParseManifestLine(const std::string& line);
std::string FormatManifestLine(const ManifestEntry& entry);
// Relative wav paths are resolved against the manifest's directory.
std::vector<ManifestEntry> ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Seconds -> frame index on the 10 ms grid.
int64_t SecondsToFrame(double seconds);

inline constexpr int8_t kTargetAmbiguous = -1;

struct LabeledExample {
  std::string utt_id;
  FeatureMatrix features;
  std::vector<int8_t> targets;  // 1, 0 or kTargetAmbiguous
  std::vector<float> weights;   // 0 exactly where the target is ambiguous
};

// Frame labels for an utterance of num_frames frames. For a keyword spanning
// frames [kw_start, kw_end) with midpoint m = (kw_start + kw_end) / 2, frames
// [m-20, m+19] clipped to the keyword and the utterance are 1; all other
// frames of a positive are ambiguous. Negatives are 0 everywhere.
void LabelFrames(std::size_t num_frames, bool positive, int64_t kw_start,
                 int64_t kw_end, std::vector<int8_t>* targets,
                 std::vector<float>* weights);
LabeledExample LabelUtterance(const ManifestEntry& entry, FeatureMatrix feat);

// An utterance assembled from a keyword segment and optional filler speech.
// The keyword occupies samples [kw_begin, kw_end).
struct ComposedUtterance {
  AudioBuffer audio;
  int variant = 1;  // 1 keyword only, 2 filler+keyword, 3 filler+keyword+filler
  int64_t kw_begin = 0;
  int64_t kw_end = 0;

  double keyword_start_s() const { return static_cast<double>(kw_begin) / kSampleRate; }
  double keyword_end_s() const { return static_cast<double>(kw_end) / kSampleRate; }
  int64_t keyword_mid_frame() const;
};

// Samples of the labeled keyword span of a positive utterance.
AudioBuffer ExtractKeyword(const ManifestEntry& entry, const AudioBuffer& audio);

// Random crop of a random filler, at least half the filler long.
AudioBuffer DrawFiller(const std::vector<AudioBuffer>& fillers, Rng* rng);

ComposedUtterance ComposeUtterance(const AudioBuffer& keyword, int variant,
                                   const AudioBuffer* before, const AudioBuffer* after);

// Variants 1, 2 and 3 of a keyword segment, in that order. Variants 2 and 3
// need a non-empty filler pool.
std::vector<ComposedUtterance> BuildPositiveVariants(const AudioBuffer& keyword,
                                                     const std::vector<AudioBuffer>& fillers,
                                                     Rng* rng);

// Cuts a variant-3 composition at the keyword midpoint frame into
// [0, m) and [m, end) (frame boundaries at 160 samples).
std::pair<AudioBuffer, AudioBuffer> BuildNegativeCuts(const ComposedUtterance& variant3);

struct AugmentConfig {
  int time_mask_max = 20;  // frames
  int freq_mask_max = 30;  // mel bins
  int n_time_masks = 1;
  int n_freq_masks = 1;
  double snr_db_min = 0.0;
  double snr_db_max = 20.0;

  void Validate(int n_mels = 80) const;
};

struct SpecMask {
  bool time = true;  // true: rows [start, start+length); false: columns
  int64_t start = 0;
  int64_t length = 0;
};

// Lengths uniform in [0, max] (clipped to the axis), start uniform over the
// positions where the whole mask fits.
std::vector<SpecMask> SampleSpecMasks(std::size_t num_frames, std::size_t dim,
                                      const AugmentConfig& cfg, Rng* rng);
void ApplySpecMasks(const std::vector<SpecMask>& masks, FeatureMatrix* feat);
FeatureMatrix SpecAugment(const FeatureMatrix& feat, const AugmentConfig& cfg, Rng* rng);

// Adds noise (looped or truncated to the speech length) scaled to the
// requested speech-to-noise power ratio. Silent noise leaves speech as is.
AudioBuffer MixNoiseSnr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db);

// Linear convolution truncated to the speech length and rescaled to the
// speech's peak amplitude.
AudioBuffer ConvolveRir(const AudioBuffer& speech, const AudioBuffer& rir);

// Zero-padded mini-batch. feats [B, D, Tmax]; targets and weights [B, Tmax]
// with weight 0 on padding and ambiguous frames. Ambiguous targets are
// stored as 0.
struct KwsBatch {
  Tensor<float> feats;
  Tensor<float> targets;
  Tensor<float> weights;
  std::vector<std::size_t> indices;
};

KwsBatch MakeBatch(const std::vector<LabeledExample>& examples,
                   const std::vector<std::size_t>& indices);

// One epoch over the examples in an order shuffled by rng at construction.
class BatchIterator {
 public:
  BatchIterator(const std::vector<LabeledExample>& examples, std::size_t batch_size,
                Rng* rng);

  bool Next(KwsBatch* batch);
  std::size_t num_batches() const;

 private:
  const std::vector<LabeledExample>& examples_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace pvt

#endif  // PVT_KWS_DATA_H_
