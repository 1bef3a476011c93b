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

#include "pvt/pipeline.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <set>
#include <thread>

#include "pvt/container.h"

namespace pvt {

namespace {

constexpr const char* kKwsKind = "kws";
constexpr const char* kSvKind = "sv";
constexpr const char* kSvClassesAttr = "sv.num_classes";

const std::string& RequireAttr(const TensorContainer& c, const std::string& key,
                               const std::string& path) {
  auto it = c.attrs.find(key);
  if (it == c.attrs.end()) {
    throw FormatError(path + ": checkpoint lacks attribute '" + key + "'");
  }
  return it->second;
}

void RequireKind(const TensorContainer& c, const std::string& kind, const std::string& path) {
  const std::string& got = RequireAttr(c, "kind", path);
  if (got != kind) {
    throw ValidationError(path + ": expected a " + kind + " checkpoint, got '" + got + "'");
  }
}

std::vector<AudioBuffer> ReadAll(const std::vector<ManifestEntry>& entries) {
  std::vector<AudioBuffer> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(ReadWav(e.wav_path));
  return out;
}

int64_t FrameCount(const AudioBuffer& audio) {
  return static_cast<int64_t>((audio.samples.size() + kHopSamples - 1) / kHopSamples);
}

double Seconds(std::chrono::steady_clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace

void SaveKwsCheckpoint(const std::string& path, const FbankConfig& features,
                       MdtcModel<float>* model) {
  SaveCheckpoint<float>(path, model->Params(), nullptr, kKwsKind,
                        KwsModelConfigJson(features, model->config()));
}

KwsSystem LoadKwsCheckpoint(const std::string& path) {
  const TensorContainer c = ReadContainer(path);
  RequireKind(c, kKwsKind, path);
  KwsSystem sys;
  MdtcConfig mdtc;
  const std::string& json = RequireAttr(c, "config", path);
  ParseKwsModelConfigJson(json, &sys.features, &mdtc);
  sys.model = MdtcModel<float>::Build(mdtc, 0);
  RestoreCheckpoint<float>(c, sys.model.Params(), nullptr, json);
  return sys;
}

void SaveSvCheckpoint(const std::string& path, const FbankConfig& features,
                      SvModel<float>* model) {
  TensorContainer c = MakeCheckpoint<float>(model->Params(), nullptr, kSvKind,
                                            SvModelConfigJson(features, model->config()));
  c.attrs[kSvClassesAttr] = std::to_string(model->num_classes());
  WriteContainer(path, c);
}

SvSystem LoadSvCheckpoint(const std::string& path) {
  const TensorContainer c = ReadContainer(path);
  RequireKind(c, kSvKind, path);
  SvSystem sys;
  SvConfig sv;
  const std::string& json = RequireAttr(c, "config", path);
  ParseSvModelConfigJson(json, &sys.features, &sv);
  int n_classes = 0;
  try {
    n_classes = std::stoi(RequireAttr(c, kSvClassesAttr, path));
  } catch (const std::logic_error&) {
    throw FormatError(path + ": bad class count attribute");
  }
  if (n_classes < 1) throw FormatError(path + ": bad class count attribute");
  sys.model = SvModel<float>::Build(sv, n_classes, 0);
  RestoreCheckpoint<float>(c, sys.model.Params(), nullptr, json);
  return sys;
}

std::vector<SvExample> BuildSvExamples(const std::vector<ManifestEntry>& entries,
                                       const FbankConfig& features,
                                       const SvAugmentConfig& augment, Rng* rng,
                                       std::vector<std::string>* speakers, bool keyword_only) {
  std::vector<ManifestEntry> used;
  for (const auto& e : entries) {
    if (!keyword_only || (e.positive() && e.keyword_end_s > e.keyword_start_s)) used.push_back(e);
  }
  PVT_CHECK(!used.empty(), keyword_only ? "manifest has no annotated keyword utterance"
                                        : "speaker training manifest is empty");
  std::set<std::string> ids;
  for (const auto& e : used) ids.insert(e.speaker_id);
  const std::vector<std::string> sorted(ids.begin(), ids.end());
  PVT_CHECK(sorted.size() >= 2, "speaker training needs at least two speakers");
  std::map<std::string, int> label;
  for (std::size_t i = 0; i < sorted.size(); ++i) label[sorted[i]] = static_cast<int>(i);
  if (speakers != nullptr) *speakers = sorted;

  std::vector<AudioBuffer> noises;
  std::vector<AudioBuffer> rirs;
  if (augment.copies > 0) {
    if (!augment.noise_manifest.empty()) noises = ReadAll(ReadManifest(augment.noise_manifest));
    if (!augment.rir_manifest.empty()) rirs = ReadAll(ReadManifest(augment.rir_manifest));
    PVT_CHECK(!noises.empty() || !rirs.empty(),
              "augment_copies > 0 needs a noise or impulse-response manifest");
  }
  std::uniform_real_distribution<double> snr(augment.snr_db_min, augment.snr_db_max);

  std::vector<SvExample> out;
  for (const auto& e : used) {
    AudioBuffer audio = ReadWav(e.wav_path);
    if (keyword_only) {
      audio = SegmentAudio(audio, SecondsToFrame(e.keyword_start_s), SecondsToFrame(e.keyword_end_s));
    }
    out.push_back({e.utt_id, ComputeFeatures(audio, features), label[e.speaker_id]});
    for (int k = 0; k < augment.copies; ++k) {
      // Alternate noise and reverberation when both are available.
      const bool use_noise = rirs.empty() || (!noises.empty() && k % 2 == 0);
      AudioBuffer copy;
      if (use_noise) {
        std::uniform_int_distribution<std::size_t> pick(0, noises.size() - 1);
        copy = MixNoiseSnr(audio, noises[pick(*rng)], snr(*rng));
      } else {
        std::vector<const AudioBuffer*> fits;
        for (const auto& r : rirs) {
          if (r.samples.size() <= audio.samples.size()) fits.push_back(&r);
        }
        if (fits.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, fits.size() - 1);
        copy = ConvolveRir(audio, *fits[pick(*rng)]);
      }
      out.push_back({e.utt_id + "#aug" + std::to_string(k), ComputeFeatures(copy, features),
                     label[e.speaker_id]});
    }
  }
  return out;
}

Verifier LoadVerifier(const RunConfig& cfg) {
  if (cfg.eval.kws_checkpoint.empty()) {
    throw ValidationError("[eval] kws_checkpoint is not set");
  }
  if (cfg.eval.sv_checkpoint.empty()) {
    throw ValidationError("[eval] sv_checkpoint is not set");
  }
  Verifier v;
  v.kws = LoadKwsCheckpoint(cfg.eval.kws_checkpoint);
  v.sv.push_back(LoadSvCheckpoint(cfg.eval.sv_checkpoint));
  if (!cfg.eval.sv_checkpoint2.empty()) v.sv.push_back(LoadSvCheckpoint(cfg.eval.sv_checkpoint2));
  v.detector = cfg.detector;
  return v;
}

AudioBuffer SegmentAudio(const AudioBuffer& audio, int64_t start_frame, int64_t end_frame) {
  end_frame = std::min(end_frame, FrameCount(audio));
  start_frame = std::max<int64_t>(0, std::min(start_frame, end_frame - kMinSegmentFrames));
  return ExtractSegment(audio, start_frame, end_frame);
}

Embedding EmbedSegment(const SvSystem& sv, const AudioBuffer& audio, int64_t start_frame,
                       int64_t end_frame) {
  return EmbedUtterance(sv.model,
                        ComputeFeatures(SegmentAudio(audio, start_frame, end_frame), sv.features));
}

UtteranceResult ProcessUtterance(const Verifier& v, const AudioBuffer& audio) {
  UtteranceResult r;
  const PosteriorTrack track = v.kws.model.Posteriors(ComputeFeatures(audio, v.kws.features));
  r.event = Detect(track, v.detector);
  if (!r.event.fired) return r;
  for (const auto& sv : v.sv) {
    r.embeddings.push_back(EmbedSegment(sv, audio, r.event.start_frame, r.event.end_frame + 1));
  }
  return r;
}

std::vector<ProfileSet> EnrollSpeakers(const Verifier& v,
                                       const std::vector<ManifestEntry>& entries) {
  PVT_CHECK(!entries.empty(), "enrollment manifest is empty");
  std::vector<std::map<std::string, std::vector<Embedding>>> per_speaker(v.sv.size());
  for (const auto& e : entries) {
    const AudioBuffer audio = ReadWav(e.wav_path);
    UtteranceResult r = ProcessUtterance(v, audio);
    if (!r.event.fired) {
      int64_t start = 0;
      int64_t end = FrameCount(audio);
      if (e.positive() && e.keyword_end_s > e.keyword_start_s) {
        start = SecondsToFrame(e.keyword_start_s);
        end = SecondsToFrame(e.keyword_end_s);
      }
      for (const auto& sv : v.sv) r.embeddings.push_back(EmbedSegment(sv, audio, start, end));
    }
    for (std::size_t s = 0; s < v.sv.size(); ++s) {
      per_speaker[s][e.speaker_id].push_back(r.embeddings[s]);
    }
  }
  std::vector<ProfileSet> out(v.sv.size());
  for (std::size_t s = 0; s < v.sv.size(); ++s) {
    for (const auto& [spk, embs] : per_speaker[s]) out[s][spk] = Enroll(spk, embs);
  }
  return out;
}

int ResolveThreads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PVT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = requested > 0 ? std::min(n, cap) : cap;
  }
  return std::max(1, n);
}

std::vector<ScoredTrial> ScoreTrials(const Verifier& v, const std::vector<ProfileSet>& profiles,
                                     const std::vector<ManifestEntry>& tests,
                                     const std::vector<Trial>& trials, int threads) {
  PVT_CHECK(profiles.size() == v.sv.size(), "one profile set per speaker system expected");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tests.size(); ++i) index[tests[i].utt_id] = i;
  for (const auto& t : trials) {
    if (!index.count(t.test_utt_id)) {
      throw ValidationError("trial names unknown test utterance '" + t.test_utt_id + "'");
    }
    for (const auto& p : profiles) {
      if (!p.count(t.enroll_speaker_id)) {
        throw ValidationError("trial names unenrolled speaker '" + t.enroll_speaker_id + "'");
      }
    }
  }

  // Each worker writes only its own slots; models are read-only.
  std::vector<UtteranceResult> results(tests.size());
  std::atomic<std::size_t> next{0};
  const int n_workers = std::min<int>(ResolveThreads(threads),
                                      std::max<int>(1, static_cast<int>(tests.size())));
  std::vector<std::exception_ptr> errors(n_workers);
  auto work = [&](int w) {
    try {
      for (std::size_t i = next++; i < tests.size(); i = next++) {
        results[i] = ProcessUtterance(v, ReadWav(tests[i].wav_path));
      }
    } catch (...) {
      errors[w] = std::current_exception();
      next = tests.size();
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    const UtteranceResult& r = results[index[t.test_utt_id]];
    ScoredTrial st;
    st.trial = t;
    st.kws_fired = r.event.fired;
    if (r.event.fired) {
      double score = CosineScore(profiles[0].at(t.enroll_speaker_id), r.embeddings[0]);
      if (profiles.size() == 2) {
        score = FuseScores(score, CosineScore(profiles[1].at(t.enroll_speaker_id), r.embeddings[1]));
      }
      st.sv_score = score;
    }
    out.push_back(std::move(st));
  }
  return out;
}

RtfResult MeasureRtf(const Verifier& v, const std::vector<AudioBuffer>& audio) {
  PVT_CHECK(!audio.empty(), "no audio to time");
  RtfResult r;
  using Clock = std::chrono::steady_clock;
  for (const auto& a : audio) {
    r.audio_seconds += a.duration_seconds();
    const auto t0 = Clock::now();
    const PosteriorTrack track = v.kws.model.Posteriors(ComputeFeatures(a, v.kws.features));
    const TriggerEvent ev = Detect(track, v.detector);
    const auto t1 = Clock::now();
    r.kws_seconds += Seconds(t1 - t0);
    if (!ev.fired) continue;
    for (const auto& sv : v.sv) EmbedSegment(sv, a, ev.start_frame, ev.end_frame + 1);
    r.sv_seconds += Seconds(Clock::now() - t1);
  }
  r.kws_rtf = Rtf(r.kws_seconds, r.audio_seconds);
  r.sv_normalized_rtf = SvNormalizedRtf(r.sv_seconds, r.audio_seconds);
  return r;
}

}  // namespace pvt
