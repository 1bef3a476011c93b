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

#include "pvt/synthetic.h"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace pvt {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double Rms(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void ScaleToRms(std::vector<float>* x, double target) {
  const double r = Rms(*x);
  if (r == 0.0) return;
  for (float& v : *x) v = static_cast<float>(v * target / r);
}

// Harmonic source through the speaker's resonances, with a little vibrato.
std::vector<float> HarmonicSource(const SyntheticSpeaker& spk, std::size_t n, Rng* rng) {
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  const double vib_rate = 4.0 + std::uniform_real_distribution<double>(0.0, 2.0)(*rng);
  std::vector<double> out(n, 0.0);
  const int max_k = static_cast<int>(7000.0 / spk.f0);
  for (int k = 1; k <= max_k; ++k) {
    const double f = k * spk.f0;
    double amp = 0.02;
    for (std::size_t j = 0; j < spk.formants.size(); ++j) {
      const double z = (f - spk.formants[j]) / spk.bandwidths[j];
      amp += 1.0 / (1.0 + z * z);
    }
    double ph = phase(*rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kSampleRate;
      const double inst = f * (1.0 + 0.015 * std::sin(kTwoPi * vib_rate * t));
      ph += kTwoPi * inst / kSampleRate;
      out[i] += amp * std::sin(ph);
    }
  }
  std::vector<float> res(out.begin(), out.end());
  ScaleToRms(&res, 0.1);
  return res;
}

void AddRamps(std::vector<float>* x, std::size_t begin, std::size_t end, std::size_t ramp) {
  ramp = std::min(ramp, (end - begin) / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const float g = static_cast<float>(0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / ramp));
    (*x)[begin + i] *= g;
    (*x)[end - 1 - i] *= g;
  }
}

std::size_t Samples(double seconds) {
  return static_cast<std::size_t>(std::llround(seconds * kSampleRate));
}

}  // namespace

SyntheticSpeaker MakeSyntheticSpeaker(int index, uint64_t seed) {
  Rng rng(seed * 1000003ULL + static_cast<uint64_t>(index));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SyntheticSpeaker s;
  s.id = "spk" + std::to_string(index);
  s.f0 = 95.0 + 18.0 * index + 6.0 * u(rng);
  s.formants = {300.0 + 600.0 * u(rng), 1000.0 + 1400.0 * u(rng), 2600.0 + 1000.0 * u(rng)};
  s.bandwidths = {60.0 + 60.0 * u(rng), 90.0 + 80.0 * u(rng), 120.0 + 100.0 * u(rng)};
  return s;
}

AudioBuffer SynthesizeFiller(const SyntheticSpeaker& spk, double seconds, Rng* rng) {
  const std::size_t n = Samples(seconds);
  AudioBuffer out;
  out.samples = HarmonicSource(spk, n, rng);
  // Syllable-rate envelope with a random gain per syllable.
  const double rate = 3.5 + std::uniform_real_distribution<double>(0.0, 2.0)(*rng);
  const double phase0 = std::uniform_real_distribution<double>(0.0, kTwoPi)(*rng);
  std::uniform_real_distribution<double> gain(0.5, 1.2);
  double g = gain(*rng);
  int last_syllable = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double arg = kTwoPi * rate * t + phase0;
    const int syllable = static_cast<int>(std::floor(arg / kTwoPi));
    if (syllable != last_syllable) {
      g = gain(*rng);
      last_syllable = syllable;
    }
    const double e = std::max(0.0, std::sin(arg));
    out.samples[i] = static_cast<float>(out.samples[i] * g * (0.15 + 0.85 * e * e));
  }
  return out;
}

AudioBuffer SynthesizeKeyword(const SyntheticSpeaker& spk, const SyntheticConfig& cfg, Rng* rng) {
  const std::size_t seg = Samples(cfg.tone_seconds);
  const std::size_t n = seg * cfg.keyword_tones.size();
  AudioBuffer out;
  out.samples = HarmonicSource(spk, n, rng);
  // Tones at half the source RMS: the keyword stays audible as the
  // speaker's voice.
  const double amp = 0.05 * std::sqrt(2.0);
  for (std::size_t j = 0; j < cfg.keyword_tones.size(); ++j) {
    std::vector<float> tone(seg);
    const double ph = std::uniform_real_distribution<double>(0.0, kTwoPi)(*rng);
    for (std::size_t i = 0; i < seg; ++i) {
      tone[i] = static_cast<float>(amp * std::sin(kTwoPi * cfg.keyword_tones[j] * i / kSampleRate + ph));
    }
    AddRamps(&tone, 0, seg, Samples(0.01));
    for (std::size_t i = 0; i < seg; ++i) out.samples[j * seg + i] += tone[i];
  }
  AddRamps(&out.samples, 0, n, Samples(0.01));
  return out;
}

SyntheticUtterance SynthesizeUtterance(const SyntheticSpeaker& spk, bool with_keyword,
                                       const SyntheticConfig& cfg, Rng* rng) {
  const double filler_s =
      std::uniform_real_distribution<double>(cfg.filler_min_s, cfg.filler_max_s)(*rng);
  const double keyword_s = cfg.tone_seconds * static_cast<double>(cfg.keyword_tones.size());
  SyntheticUtterance u;
  u.has_keyword = with_keyword;
  if (with_keyword) {
    u.audio = SynthesizeFiller(spk, filler_s, rng);
    const AudioBuffer kw = SynthesizeKeyword(spk, cfg, rng);
    u.keyword_start_s = static_cast<double>(u.audio.samples.size()) / kSampleRate;
    u.audio.samples.insert(u.audio.samples.end(), kw.samples.begin(), kw.samples.end());
    u.keyword_end_s = static_cast<double>(u.audio.samples.size()) / kSampleRate;
  } else {
    u.audio = SynthesizeFiller(spk, filler_s + keyword_s, rng);
  }
  u.audio.samples.resize(u.audio.samples.size() + Samples(cfg.tail_s), 0.0f);
  std::normal_distribution<double> noise(0.0, std::pow(10.0, cfg.noise_db / 20.0));
  for (float& v : u.audio.samples) v = static_cast<float>(std::clamp(v + noise(*rng), -1.0, 1.0));
  return u;
}

SyntheticCorpusFiles GenerateSyntheticCorpus(const std::string& dir, const SyntheticConfig& cfg,
                                             const SyntheticLayout& layout) {
  PVT_CHECK(cfg.n_speakers >= 2, "synthetic corpus needs at least two speakers");
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "wav");
  Rng rng(cfg.seed);
  std::vector<SyntheticSpeaker> speakers;
  for (int i = 0; i < cfg.n_speakers; ++i) speakers.push_back(MakeSyntheticSpeaker(i, cfg.seed));

  auto make_split = [&](const std::string& split, int n_pos, int n_neg) {
    std::vector<ManifestEntry> entries;
    for (const auto& spk : speakers) {
      for (int k = 0; k < n_pos + n_neg; ++k) {
        const bool pos = k < n_pos;
        const SyntheticUtterance u = SynthesizeUtterance(spk, pos, cfg, &rng);
        ManifestEntry e;
        e.utt_id = split + "_" + spk.id + "_" + (pos ? "kw" : "nokw") + std::to_string(k);
        e.wav_path = "wav/" + e.utt_id + ".wav";
        e.speaker_id = spk.id;
        e.label = pos ? UttLabel::kPositive : UttLabel::kNegative;
        e.keyword_start_s = u.keyword_start_s;
        e.keyword_end_s = u.keyword_end_s;
        WriteWav((root / e.wav_path).string(), u.audio);
        entries.push_back(std::move(e));
      }
    }
    const std::string path = (root / (split + ".jsonl")).string();
    WriteManifest(path, entries);
    return std::make_pair(path, entries);
  };
  auto make_trials = [&](const std::string& name, const std::vector<ManifestEntry>& tests) {
    std::vector<Trial> trials;
    for (const auto& spk : speakers) {
      for (const auto& e : tests) {
        trials.push_back({spk.id, e.utt_id, e.positive() && e.speaker_id == spk.id});
      }
    }
    const std::string path = (root / name).string();
    WriteTrials(path, trials);
    return path;
  };

  SyntheticCorpusFiles files;
  files.train_manifest = make_split("train", layout.train_pos, layout.train_neg).first;
  files.enroll_manifest = make_split("enroll", layout.enroll, 0).first;
  const auto dev = make_split("dev", layout.dev_pos, layout.dev_neg);
  files.dev_manifest = dev.first;
  files.dev_trials = make_trials("dev_trials.txt", dev.second);
  const auto eval = make_split("eval", layout.eval_pos, layout.eval_neg);
  files.eval_manifest = eval.first;
  files.eval_trials = make_trials("eval_trials.txt", eval.second);
  return files;
}

}  // namespace pvt
