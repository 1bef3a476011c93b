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

#include "pvt/kws_data.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace pvt {

namespace {

using json = nlohmann::json;

const char* LabelName(UttLabel label) {
  return label == UttLabel::kPositive ? "positive" : "negative";
}

double PeakAbs(const std::vector<float>& x) {
  double peak = 0.0;
  for (float v : x) peak = std::max(peak, std::fabs(static_cast<double>(v)));
  return peak;
}

double MeanPower(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

// ------------------------------------------------------------- manifest --

void ManifestEntry::Validate(double duration_s) const {
  PVT_CHECK(!utt_id.empty(), "manifest: empty utt_id");
  if (!positive()) return;
  if (!(keyword_start_s >= 0.0 && keyword_start_s < keyword_end_s)) {
    throw ValidationError("manifest: " + utt_id + ": need 0 <= keyword_start_s < keyword_end_s");
  }
  // Half a sample of slack for times written with limited precision.
  if (duration_s >= 0.0 && keyword_end_s > duration_s + 0.5 / kSampleRate) {
    throw ValidationError("manifest: " + utt_id + ": keyword_end_s=" +
                          std::to_string(keyword_end_s) + " exceeds duration " +
                          std::to_string(duration_s));
  }
}

ManifestEntry ParseManifestLine(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: malformed JSON: ") + e.what());
  }
  PVT_CHECK(j.is_object(), "manifest: each line must be a JSON object");
  ManifestEntry e;
  try {
    e.utt_id = j.at("utt_id").get<std::string>();
    e.wav_path = j.at("wav_path").get<std::string>();
    e.speaker_id = j.value("speaker_id", std::string());
    const std::string label = j.at("label").get<std::string>();
    if (label == "positive") {
      e.label = UttLabel::kPositive;
    } else if (label == "negative") {
      e.label = UttLabel::kNegative;
    } else {
      throw ValidationError("manifest: " + e.utt_id + ": label must be positive or negative, got " +
                            label);
    }
    if (e.positive()) {
      if (!j.contains("keyword_start_s") || !j.contains("keyword_end_s")) {
        throw ValidationError("manifest: " + e.utt_id +
                              ": positive entry missing keyword_start_s/keyword_end_s");
      }
      e.keyword_start_s = j.at("keyword_start_s").get<double>();
      e.keyword_end_s = j.at("keyword_end_s").get<double>();
    }
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("manifest: ") + ex.what());
  }
  e.Validate();
  return e;
}

std::string FormatManifestLine(const ManifestEntry& entry) {
  json j;
  j["utt_id"] = entry.utt_id;
  j["wav_path"] = entry.wav_path;
  j["speaker_id"] = entry.speaker_id;
  j["label"] = LabelName(entry.label);
  if (entry.positive()) {
    j["keyword_start_s"] = entry.keyword_start_s;
    j["keyword_end_s"] = entry.keyword_end_s;
  }
  return j.dump();
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ManifestEntry e = ParseManifestLine(line);
      std::filesystem::path wav(e.wav_path);
      if (wav.is_relative()) e.wav_path = (base / wav).string();
      entries.push_back(std::move(e));
    } catch (const ValidationError& ex) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

void WriteManifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  for (const auto& e : entries) out << FormatManifestLine(e) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

int64_t SecondsToFrame(double seconds) {
  return std::llround(seconds * kSampleRate / kHopSamples);
}

// -------------------------------------------------------------- labeling --

void LabelFrames(std::size_t num_frames, bool positive, int64_t kw_start, int64_t kw_end,
                 std::vector<int8_t>* targets, std::vector<float>* weights) {
  targets->assign(num_frames, 0);
  weights->assign(num_frames, 1.0f);
  if (!positive) return;
  PVT_CHECK(kw_start < kw_end, "label: empty keyword span");
  const int64_t n = static_cast<int64_t>(num_frames);
  const int64_t m = (kw_start + kw_end) / 2;
  const int64_t lo = std::max({m - 20, kw_start, int64_t{0}});
  const int64_t hi = std::min({m + 20, kw_end, n});
  if (lo >= hi) {
    throw ValidationError("label: keyword frames [" + std::to_string(kw_start) + ", " +
                          std::to_string(kw_end) + ") leave no target frame in an utterance of " +
                          std::to_string(n) + " frames");
  }
  std::fill(targets->begin(), targets->end(), kTargetAmbiguous);
  std::fill(weights->begin(), weights->end(), 0.0f);
  for (int64_t t = lo; t < hi; ++t) {
    (*targets)[t] = 1;
    (*weights)[t] = 1.0f;
  }
}

LabeledExample LabelUtterance(const ManifestEntry& entry, FeatureMatrix feat) {
  entry.Validate();
  LabeledExample ex;
  ex.utt_id = entry.utt_id;
  LabelFrames(feat.num_frames(), entry.positive(), SecondsToFrame(entry.keyword_start_s),
              SecondsToFrame(entry.keyword_end_s), &ex.targets, &ex.weights);
  ex.features = std::move(feat);
  return ex;
}

// ----------------------------------------------------------- composition --

int64_t ComposedUtterance::keyword_mid_frame() const {
  return (SecondsToFrame(keyword_start_s()) + SecondsToFrame(keyword_end_s())) / 2;
}

AudioBuffer ExtractKeyword(const ManifestEntry& entry, const AudioBuffer& audio) {
  PVT_CHECK(entry.positive(), "extract keyword: " + entry.utt_id + " is not a positive");
  entry.Validate(audio.duration_seconds());
  const auto n = static_cast<int64_t>(audio.samples.size());
  const int64_t b = std::clamp<int64_t>(std::llround(entry.keyword_start_s * audio.sample_rate), 0, n);
  const int64_t e = std::clamp<int64_t>(std::llround(entry.keyword_end_s * audio.sample_rate), 0, n);
  PVT_CHECK(b < e, "extract keyword: " + entry.utt_id + " has an empty keyword span");
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.assign(audio.samples.begin() + b, audio.samples.begin() + e);
  return out;
}

AudioBuffer DrawFiller(const std::vector<AudioBuffer>& fillers, Rng* rng) {
  PVT_CHECK(!fillers.empty(), "filler pool is empty");
  const auto& src =
      fillers[std::uniform_int_distribution<std::size_t>(0, fillers.size() - 1)(*rng)];
  const int64_t len = static_cast<int64_t>(src.samples.size());
  int64_t crop = std::uniform_int_distribution<int64_t>((len + 1) / 2, std::max<int64_t>(len, 1))(*rng);
  crop = std::min(crop, len);
  // Whole frames keep the tracked keyword on the 10 ms grid.
  if (crop >= kHopSamples) crop -= crop % kHopSamples;
  const int64_t start = std::uniform_int_distribution<int64_t>(0, len - crop)(*rng);
  AudioBuffer out;
  out.sample_rate = src.sample_rate;
  out.samples.assign(src.samples.begin() + start, src.samples.begin() + start + crop);
  return out;
}

ComposedUtterance ComposeUtterance(const AudioBuffer& keyword, int variant,
                                   const AudioBuffer* before, const AudioBuffer* after) {
  PVT_CHECK(!keyword.samples.empty(), "compose: empty keyword segment");
  ComposedUtterance out;
  out.variant = variant;
  out.audio.sample_rate = keyword.sample_rate;
  auto& s = out.audio.samples;
  if (before) {
    PVT_CHECK(before->sample_rate == keyword.sample_rate, "compose: sample rate mismatch");
    s.insert(s.end(), before->samples.begin(), before->samples.end());
  }
  out.kw_begin = static_cast<int64_t>(s.size());
  s.insert(s.end(), keyword.samples.begin(), keyword.samples.end());
  out.kw_end = static_cast<int64_t>(s.size());
  if (after) {
    PVT_CHECK(after->sample_rate == keyword.sample_rate, "compose: sample rate mismatch");
    s.insert(s.end(), after->samples.begin(), after->samples.end());
  }
  return out;
}

std::vector<ComposedUtterance> BuildPositiveVariants(const AudioBuffer& keyword,
                                                     const std::vector<AudioBuffer>& fillers,
                                                     Rng* rng) {
  if (fillers.empty()) {
    throw ValidationError("positive variants 2 and 3 need a non-empty filler pool");
  }
  std::vector<ComposedUtterance> out;
  out.push_back(ComposeUtterance(keyword, 1, nullptr, nullptr));
  const AudioBuffer pre2 = DrawFiller(fillers, rng);
  out.push_back(ComposeUtterance(keyword, 2, &pre2, nullptr));
  const AudioBuffer pre3 = DrawFiller(fillers, rng);
  const AudioBuffer post3 = DrawFiller(fillers, rng);
  out.push_back(ComposeUtterance(keyword, 3, &pre3, &post3));
  return out;
}

std::pair<AudioBuffer, AudioBuffer> BuildNegativeCuts(const ComposedUtterance& variant3) {
  const int64_t n = static_cast<int64_t>(variant3.audio.samples.size());
  const int64_t cut = variant3.keyword_mid_frame() * kHopSamples;
  if (cut <= 0 || cut >= n) {
    throw ValidationError("negative cut: keyword midpoint at sample " + std::to_string(cut) +
                          " is on the utterance boundary");
  }
  std::pair<AudioBuffer, AudioBuffer> out;
  out.first.sample_rate = out.second.sample_rate = variant3.audio.sample_rate;
  out.first.samples.assign(variant3.audio.samples.begin(), variant3.audio.samples.begin() + cut);
  out.second.samples.assign(variant3.audio.samples.begin() + cut, variant3.audio.samples.end());
  return out;
}

// ---------------------------------------------------------- augmentation --

void AugmentConfig::Validate(int n_mels) const {
  PVT_CHECK(time_mask_max >= 0, "augment: time_mask_max must be >= 0");
  PVT_CHECK(freq_mask_max >= 0 && freq_mask_max <= n_mels,
            "augment: freq_mask_max must be in [0, n_mels]");
  PVT_CHECK(n_time_masks >= 0 && n_freq_masks >= 0, "augment: mask counts must be >= 0");
  PVT_CHECK(snr_db_min <= snr_db_max, "augment: snr_db_min > snr_db_max");
}

std::vector<SpecMask> SampleSpecMasks(std::size_t num_frames, std::size_t dim,
                                      const AugmentConfig& cfg, Rng* rng) {
  std::vector<SpecMask> masks;
  auto draw = [&](bool time, int max_len, int64_t axis) {
    SpecMask m;
    m.time = time;
    m.length = std::uniform_int_distribution<int64_t>(0, max_len)(*rng);
    m.length = std::min(m.length, axis);
    m.start = std::uniform_int_distribution<int64_t>(0, axis - m.length)(*rng);
    masks.push_back(m);
  };
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    draw(true, cfg.time_mask_max, static_cast<int64_t>(num_frames));
  }
  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    draw(false, cfg.freq_mask_max, static_cast<int64_t>(dim));
  }
  return masks;
}

void ApplySpecMasks(const std::vector<SpecMask>& masks, FeatureMatrix* feat) {
  const auto frames = static_cast<int64_t>(feat->num_frames());
  const auto dim = static_cast<int64_t>(feat->dim());
  for (const auto& m : masks) {
    const int64_t axis = m.time ? frames : dim;
    PVT_CHECK(m.start >= 0 && m.length >= 0 && m.start + m.length <= axis,
              "spec mask out of range");
    for (int64_t i = m.start; i < m.start + m.length; ++i) {
      if (m.time) {
        std::fill_n(feat->row(i), dim, 0.0f);
      } else {
        for (int64_t t = 0; t < frames; ++t) (*feat)(t, i) = 0.0f;
      }
    }
  }
}

FeatureMatrix SpecAugment(const FeatureMatrix& feat, const AugmentConfig& cfg, Rng* rng) {
  FeatureMatrix out = feat;
  ApplySpecMasks(SampleSpecMasks(feat.num_frames(), feat.dim(), cfg, rng), &out);
  return out;
}

AudioBuffer MixNoiseSnr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db) {
  PVT_CHECK(speech.sample_rate == noise.sample_rate, "mix: sample rate mismatch");
  PVT_CHECK(!noise.samples.empty(), "mix: empty noise");
  PVT_CHECK(std::isfinite(snr_db), "mix: snr_db must be finite");
  AudioBuffer out = speech;
  const std::size_t n = speech.samples.size();
  std::vector<float> fitted(n);
  for (std::size_t i = 0; i < n; ++i) fitted[i] = noise.samples[i % noise.samples.size()];
  const double p_noise = MeanPower(fitted);
  if (p_noise == 0.0) return out;
  const double p_speech = MeanPower(speech.samples);
  const double scale = std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = static_cast<float>(speech.samples[i] + scale * fitted[i]);
  }
  return out;
}

AudioBuffer ConvolveRir(const AudioBuffer& speech, const AudioBuffer& rir) {
  PVT_CHECK(!rir.samples.empty(), "rir: empty impulse response");
  PVT_CHECK(speech.sample_rate == rir.sample_rate, "rir: sample rate mismatch");
  PVT_CHECK(rir.samples.size() <= speech.samples.size(),
            "rir: impulse response longer than the speech");
  const std::size_t n = speech.samples.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t k = 0; k < rir.samples.size(); ++k) {
    const double h = rir.samples[k];
    if (h == 0.0) continue;
    for (std::size_t i = k; i < n; ++i) y[i] += h * speech.samples[i - k];
  }
  double peak_y = 0.0;
  for (double v : y) peak_y = std::max(peak_y, std::fabs(v));
  const double gain = peak_y > 0.0 ? PeakAbs(speech.samples) / peak_y : 1.0;
  AudioBuffer out;
  out.sample_rate = speech.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(y[i] * gain);
  return out;
}

// -------------------------------------------------------------- batching --

KwsBatch MakeBatch(const std::vector<LabeledExample>& examples,
                   const std::vector<std::size_t>& indices) {
  PVT_CHECK(!indices.empty(), "batch: no examples");
  const int64_t dim = static_cast<int64_t>(examples[indices[0]].features.dim());
  int64_t max_t = 0;
  for (std::size_t i : indices) {
    const auto& ex = examples.at(i);
    PVT_CHECK(static_cast<int64_t>(ex.features.dim()) == dim, "batch: feature dims differ");
    PVT_CHECK(ex.targets.size() == ex.features.num_frames() &&
                  ex.weights.size() == ex.features.num_frames(),
              "batch: " + ex.utt_id + " has labels of the wrong length");
    max_t = std::max<int64_t>(max_t, static_cast<int64_t>(ex.features.num_frames()));
  }
  const auto b = static_cast<int64_t>(indices.size());
  KwsBatch batch;
  batch.indices = indices;
  batch.feats = Tensor<float>({b, dim, max_t});
  batch.targets = Tensor<float>({b, max_t});
  batch.weights = Tensor<float>({b, max_t});
  for (int64_t k = 0; k < b; ++k) {
    const auto& ex = examples[indices[k]];
    const auto len = static_cast<int64_t>(ex.features.num_frames());
    float* f = batch.feats.data() + k * dim * max_t;
    for (int64_t t = 0; t < len; ++t) {
      const float* row = ex.features.row(t);
      for (int64_t d = 0; d < dim; ++d) f[d * max_t + t] = row[d];
      batch.targets[k * max_t + t] = ex.targets[t] == 1 ? 1.0f : 0.0f;
      batch.weights[k * max_t + t] = ex.targets[t] == kTargetAmbiguous ? 0.0f : ex.weights[t];
    }
  }
  return batch;
}

BatchIterator::BatchIterator(const std::vector<LabeledExample>& examples, std::size_t batch_size,
                             Rng* rng)
    : examples_(examples), batch_size_(batch_size), order_(examples.size()) {
  PVT_CHECK(batch_size >= 1, "batch_size must be >= 1");
  PVT_CHECK(!examples.empty(), "batch iterator: empty dataset");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), *rng);
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::Next(KwsBatch* batch) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), pos_ + batch_size_);
  *batch = MakeBatch(examples_, std::vector<std::size_t>(order_.begin() + pos_, order_.begin() + end));
  pos_ = end;
  return true;
}

}  // namespace pvt
