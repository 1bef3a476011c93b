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

#ifndef PVT_FEATURES_H_
#define PVT_FEATURES_H_

#include <cstddef>
#include <vector>

#include "pvt/audio.h"

namespace pvt {

struct FbankConfig {
  int n_mels = 80;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double fmin = 20.0;
  double fmax = 7600.0;
  double log_floor = 1e-10;
  double preemph = 0.97;
  bool apply_cmn = true;  // per-utterance mean normalization

  int win_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  void Validate(int sample_rate) const;
};

// T x D log-mel features stored row major (frame-major).
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t num_frames, std::size_t dim, float fill = 0.0f)
      : num_frames_(num_frames), dim_(dim), data_(num_frames * dim, fill) {}

  std::size_t num_frames() const { return num_frames_; }
  std::size_t dim() const { return dim_; }
  float frame_hop_ms() const { return 10.0f; }

  float& operator()(std::size_t t, std::size_t d) { return data_[t * dim_ + d]; }
  float operator()(std::size_t t, std::size_t d) const {
    return data_[t * dim_ + d];
  }
  float* row(std::size_t t) { return data_.data() + t * dim_; }
  const float* row(std::size_t t) const { return data_.data() + t * dim_; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  // Frames [begin, end).
  FeatureMatrix Slice(std::size_t begin, std::size_t end) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t num_frames_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

// 1 + floor((n - win) / hop); 0 when n < win.
std::size_t NumFrames(std::size_t num_samples, int win_samples, int hop_samples);

// Triangular mel filters, n_mels x (fft_size/2 + 1), weights >= 0.
class MelFilterbank {
 public:
  MelFilterbank(const FbankConfig& cfg, int sample_rate);

  int num_bins() const { return num_bins_; }
  int num_mels() const { return num_mels_; }
  double center_hz(int m) const { return centers_hz_[m]; }
  float weight(int m, int bin) const { return weights_[m * num_bins_ + bin]; }

  // Power spectrum (num_bins) -> mel energies (num_mels).
  void Apply(const float* power, float* mel) const;

  static double HzToMel(double hz);
  static double MelToHz(double mel);

 private:
  int num_bins_;
  int num_mels_;
  std::vector<double> centers_hz_;
  std::vector<float> weights_;
};

// Pre-emphasis, Hamming window, |FFT|^2, mel filterbank, log(max(e, floor)).
// CMN is NOT applied here; see ApplyCmn.
FeatureMatrix ComputeLogFbank(const AudioBuffer& audio, const FbankConfig& cfg);

// Subtracts the per-dimension mean over frames.
FeatureMatrix ApplyCmn(const FeatureMatrix& feat);

// ComputeLogFbank followed by ApplyCmn when cfg.apply_cmn.
FeatureMatrix ComputeFeatures(const AudioBuffer& audio, const FbankConfig& cfg);

}  // namespace pvt

#endif  // PVT_FEATURES_H_
