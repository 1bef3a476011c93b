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
#include "pvt/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace pvt {

namespace {

// In-place iterative radix-2 FFT; n must be a power of two.
void Fft(std::vector<std::complex<double>>* data) {
  auto& a = *data;
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

int FbankConfig::win_samples(int sample_rate) const {
  return static_cast<int>(std::lround(win_ms * sample_rate / 1000.0));
}

int FbankConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FbankConfig::Validate(int sample_rate) const {
  PVT_CHECK(n_mels >= 1, "fbank: n_mels must be >= 1");
  PVT_CHECK(hop_ms > 0 && win_ms > hop_ms, "fbank: need win_ms > hop_ms > 0");
  PVT_CHECK(fmin >= 0 && fmin < fmax && fmax <= sample_rate / 2.0,
            "fbank: need 0 <= fmin < fmax <= sample_rate/2");
  PVT_CHECK(log_floor > 0, "fbank: log_floor must be positive");
  PVT_CHECK(fft_size >= win_samples(sample_rate) &&
                (fft_size & (fft_size - 1)) == 0,
            "fbank: fft_size must be a power of two >= window length");
}

FeatureMatrix FeatureMatrix::Slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, num_frames_);
  begin = std::min(begin, end);
  FeatureMatrix out(end - begin, dim_);
  std::copy(data_.begin() + begin * dim_, data_.begin() + end * dim_,
            out.data_.begin());
  return out;
}

std::size_t NumFrames(std::size_t num_samples, int win_samples,
                      int hop_samples) {
  const auto win = static_cast<std::size_t>(win_samples);
  if (num_samples < win) return 0;
  return 1 + (num_samples - win) / static_cast<std::size_t>(hop_samples);
}

double MelFilterbank::HzToMel(double hz) {
  return 1127.0 * std::log(1.0 + hz / 700.0);
}

double MelFilterbank::MelToHz(double mel) {
  return 700.0 * (std::exp(mel / 1127.0) - 1.0);
}

MelFilterbank::MelFilterbank(const FbankConfig& cfg, int sample_rate)
    : num_bins_(cfg.fft_size / 2 + 1), num_mels_(cfg.n_mels) {
  const double mel_lo = HzToMel(cfg.fmin);
  const double mel_hi = HzToMel(cfg.fmax);
  const double delta = (mel_hi - mel_lo) / (num_mels_ + 1);
  const double bin_hz = static_cast<double>(sample_rate) / cfg.fft_size;
  centers_hz_.resize(num_mels_);
  weights_.assign(static_cast<std::size_t>(num_mels_) * num_bins_, 0.0f);
  for (int m = 0; m < num_mels_; ++m) {
    const double left = mel_lo + m * delta;
    const double center = left + delta;
    const double right = center + delta;
    centers_hz_[m] = MelToHz(center);
    for (int k = 0; k < num_bins_; ++k) {
      const double mel = HzToMel(k * bin_hz);
      double w = 0.0;
      if (mel > left && mel <= center) {
        w = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        w = (right - mel) / (right - center);
      }
      weights_[m * num_bins_ + k] = static_cast<float>(w);
    }
  }
}

void MelFilterbank::Apply(const float* power, float* mel) const {
  for (int m = 0; m < num_mels_; ++m) {
    const float* w = weights_.data() + m * num_bins_;
    double acc = 0.0;
    for (int k = 0; k < num_bins_; ++k) acc += static_cast<double>(w[k]) * power[k];
    mel[m] = static_cast<float>(acc);
  }
}

FeatureMatrix ComputeLogFbank(const AudioBuffer& audio,
                              const FbankConfig& cfg) {
  cfg.Validate(audio.sample_rate);
  const int win = cfg.win_samples(audio.sample_rate);
  const int hop = cfg.hop_samples(audio.sample_rate);
  const std::size_t num_frames = NumFrames(audio.samples.size(), win, hop);
  if (num_frames == 0) {
    throw ValidationError("audio shorter than one analysis window (" +
                          std::to_string(audio.samples.size()) + " < " +
                          std::to_string(win) + " samples)");
  }
  const MelFilterbank bank(cfg, audio.sample_rate);
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
  }
  FeatureMatrix out(num_frames, cfg.n_mels);
  std::vector<std::complex<double>> spec(cfg.fft_size);
  std::vector<float> power(bank.num_bins());
  const float log_floor = static_cast<float>(cfg.log_floor);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const float* frame = audio.samples.data() + t * hop;
    std::fill(spec.begin(), spec.end(), std::complex<double>(0.0));
    for (int i = 0; i < win; ++i) {
      // Pre-emphasis inside the frame; first sample uses itself as history.
      const double prev = i > 0 ? frame[i - 1] : frame[0];
      spec[i] = (frame[i] - cfg.preemph * prev) * window[i];
    }
    Fft(&spec);
    for (int k = 0; k < bank.num_bins(); ++k) {
      power[k] = static_cast<float>(std::norm(spec[k]));
    }
    float* row = out.row(t);
    bank.Apply(power.data(), row);
    for (int m = 0; m < cfg.n_mels; ++m) {
      row[m] = std::log(std::max(row[m], log_floor));
    }
  }
  return out;
}

FeatureMatrix ApplyCmn(const FeatureMatrix& feat) {
  FeatureMatrix out = feat;
  const std::size_t n = feat.num_frames();
  if (n == 0) return out;
  std::vector<double> mean(feat.dim(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < feat.dim(); ++d) mean[d] += feat(t, d);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < feat.dim(); ++d) {
      out(t, d) = static_cast<float>(feat(t, d) - mean[d]);
    }
  }
  return out;
}

FeatureMatrix ComputeFeatures(const AudioBuffer& audio,
                              const FbankConfig& cfg) {
  FeatureMatrix f = ComputeLogFbank(audio, cfg);
  return cfg.apply_cmn ? ApplyCmn(f) : f;
}

}  // namespace pvt
