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

#include "cli.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "pvt/config.h"
#include "pvt/container.h"
#include "pvt/kws_train.h"
#include "pvt/pipeline.h"
#include "spdlog/spdlog.h"

namespace pvt {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
};

struct Args {
  CommonArgs common;
  std::string manifest;
  std::string val_manifest;
  std::string init;
  std::string kws;
  std::string trials;
  std::string scores;
  std::string dev_cost;
};

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

RunConfig LoadConfig(const CommonArgs& a) {
  RunConfig cfg = LoadRunConfig(a.config);
  if (a.seed) {
    cfg.kws_train.seed = *a.seed;
    cfg.sv_train.seed = *a.seed;
  }
  cfg.Validate();
  fs::create_directories(a.out);
  return cfg;
}

const std::string& Pick(const std::string& flag, const std::string& fallback, const char* what) {
  if (!flag.empty()) return flag;
  if (fallback.empty()) throw ValidationError(std::string("no ") + what + " given");
  return fallback;
}

void CmdFeatures(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  TensorContainer c;
  for (const auto& e : ReadManifest(a.manifest)) {
    const FeatureMatrix f = ComputeFeatures(ReadWav(e.wav_path), cfg.features);
    c.Add(e.utt_id, {static_cast<int64_t>(f.num_frames()), static_cast<int64_t>(f.dim())},
          f.data());
  }
  c.attrs["kind"] = "features";
  c.attrs["config"] = KwsModelConfigJson(cfg.features, cfg.mdtc);
  WriteContainer((fs::path(a.common.out) / "features.pvtk").string(), c);
}

void CmdTrainKws(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const uint64_t seed = cfg.kws_train.seed;
  std::vector<ManifestEntry> train = ReadManifest(a.manifest);
  std::vector<ManifestEntry> val;
  if (!a.val_manifest.empty()) {
    val = ReadManifest(a.val_manifest);
  } else if (cfg.kws_train.val_fraction > 0.0) {
    std::tie(train, val) = SplitTrainVal(train, cfg.kws_train.val_fraction, seed);
  }
  Rng rng(seed);
  const auto train_ex = BuildKwsExamples(train, cfg.features, cfg.kws_train, &rng);
  KwsTrainConfig plain = cfg.kws_train;
  plain.variant1 = plain.variant2 = plain.variant3 = plain.negative_cuts = 0;
  const auto val_ex =
      val.empty() ? std::vector<LabeledExample>{} : BuildKwsExamples(val, cfg.features, plain, &rng);
  spdlog::info("train-kws: {} training and {} validation examples", train_ex.size(), val_ex.size());
  MdtcModel<float> model = MdtcModel<float>::Build(cfg.mdtc, seed);
  const TrainReport report = TrainKws(&model, train_ex, val_ex, cfg.kws_train, [](const EpochRecord& r) {
    spdlog::info("train-kws: epoch {} train {:.5f} val {:.5f} lr {:.2e}", r.epoch, r.train_loss,
                 r.val_loss, r.lr);
  });
  SaveKwsCheckpoint((fs::path(a.common.out) / "kws.ckpt").string(), cfg.features, &model);
  WriteText(fs::path(a.common.out) / "train_log.jsonl", report.ToJsonl());
}

void LogSvEpoch(const SvEpochRecord& r) {
  spdlog::info("sv: phase {} epoch {} loss {:.5f} acc {:.3f} lr {:.2e}", r.phase, r.epoch, r.loss,
               r.accuracy, r.lr);
}

void CmdTrainSv(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  Rng rng(cfg.sv_train.seed);
  std::vector<std::string> speakers;
  const auto examples =
      BuildSvExamples(ReadManifest(a.manifest), cfg.features, cfg.sv_augment, &rng, &speakers);
  SvModel<float> model =
      SvModel<float>::Build(cfg.sv, static_cast<int>(speakers.size()), cfg.sv_train.seed);
  const SvTrainReport report = TrainSv(&model, examples, cfg.sv_train, LogSvEpoch);
  SaveSvCheckpoint((fs::path(a.common.out) / "sv.ckpt").string(), cfg.features, &model);
  WriteText(fs::path(a.common.out) / "train_log.jsonl", report.ToJsonl());
  std::string list;
  for (const auto& s : speakers) list += s + "\n";
  WriteText(fs::path(a.common.out) / "speakers.txt", list);
}

void CmdFinetuneSv(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  SvSystem sys = LoadSvCheckpoint(a.init);
  Rng rng(cfg.sv_train.seed);
  const auto examples =
      BuildSvExamples(ReadManifest(a.manifest), sys.features, cfg.sv_augment, &rng, nullptr, true);
  const SvTrainReport report = FinetuneSv(&sys.model, examples, cfg.sv_train, LogSvEpoch);
  SaveSvCheckpoint((fs::path(a.common.out) / "sv.ckpt").string(), sys.features, &sys.model);
  WriteText(fs::path(a.common.out) / "finetune_log.jsonl", report.ToJsonl());
}

void CmdDetect(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const KwsSystem kws = LoadKwsCheckpoint(Pick(a.kws, cfg.eval.kws_checkpoint, "keyword checkpoint"));
  std::string lines;
  for (const auto& e : ReadManifest(Pick(a.manifest, cfg.eval.test_manifest, "manifest"))) {
    const PosteriorTrack track = kws.model.Posteriors(ComputeFeatures(ReadWav(e.wav_path), kws.features));
    lines += TriggerEventJson(e.utt_id, Detect(track, cfg.detector)) + "\n";
  }
  WriteText(fs::path(a.common.out) / "events.jsonl", lines);
}

void CmdEnroll(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  // Enrollment segments come from the detector, so the keyword model is needed too.
  const Verifier v = LoadVerifier(cfg);
  const auto profiles =
      EnrollSpeakers(v, ReadManifest(Pick(a.manifest, cfg.eval.enroll_manifest, "manifest")));
  std::string lines;
  for (std::size_t s = 0; s < profiles.size(); ++s) {
    for (const auto& [spk, p] : profiles[s]) {
      nlohmann::json j;
      j["system"] = s;
      j["speaker_id"] = spk;
      j["vector"] = p.vector;
      lines += j.dump() + "\n";
    }
  }
  WriteText(fs::path(a.common.out) / "profiles.jsonl", lines);
}

std::vector<ScoredTrial> ScoreFromConfig(const RunConfig& cfg, const std::vector<Trial>& trials,
                                         const std::string& test_manifest) {
  const Verifier v = LoadVerifier(cfg);
  const auto profiles = EnrollSpeakers(
      v, ReadManifest(Pick("", cfg.eval.enroll_manifest, "[eval] enroll_manifest")));
  return ScoreTrials(v, profiles, ReadManifest(Pick(test_manifest, cfg.eval.test_manifest, "test manifest")),
                     trials, cfg.eval.threads);
}

void CmdScore(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const auto trials = ReadTrials(Pick(a.trials, cfg.eval.trials, "trials"));
  WriteScores((fs::path(a.common.out) / "scores.txt").string(),
              ScoreFromConfig(cfg, trials, a.manifest));
}

double ThresholdFromJson(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j == "inf") return std::numeric_limits<double>::infinity();
    if (j == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("bad threshold value " + j.dump());
  }
  return j.get<double>();
}

void CmdEvaluate(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const auto trials = ReadTrials(Pick(a.trials, cfg.eval.trials, "trials"));
  std::vector<ScoredTrial> scored;
  if (!a.scores.empty()) {
    scored = ReadScores(a.scores, trials);
  } else {
    scored = ScoreFromConfig(cfg, trials, a.manifest);
    WriteScores((fs::path(a.common.out) / "scores.txt").string(), scored);
  }
  const CostReport report = BuildCostReport(scored, cfg.eval.alpha);
  WriteDetCsv((fs::path(a.common.out) / "det.csv").string(), DetCurve(scored));
  nlohmann::json j = nlohmann::json::parse(report.ToJson());
  if (!a.dev_cost.empty()) {
    std::ifstream is(a.dev_cost);
    if (!is) throw IoError("cannot read " + a.dev_cost);
    nlohmann::json dev;
    try {
      dev = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(a.dev_cost + ": " + e.what());
    }
    if (!dev.contains("threshold")) throw FormatError(a.dev_cost + ": no threshold");
    const double thr = ThresholdFromJson(dev["threshold"]);
    j["transfer"] = {{"threshold", dev["threshold"]},
                     {"cd", TransferCost(scored, thr, cfg.eval.alpha)}};
  }
  WriteText(fs::path(a.common.out) / "cost.json", j.dump(2) + "\n");
}

void CmdRtf(const Args& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const Verifier v = LoadVerifier(cfg);
  std::vector<AudioBuffer> audio;
  for (const auto& e : ReadManifest(Pick(a.manifest, cfg.eval.test_manifest, "manifest"))) {
    audio.push_back(ReadWav(e.wav_path));
  }
  const RtfResult r = MeasureRtf(v, audio);
  nlohmann::json j;
  j["audio_seconds"] = r.audio_seconds;
  j["kws_seconds"] = r.kws_seconds;
  j["sv_seconds"] = r.sv_seconds;
  j["kws_rtf"] = r.kws_rtf;
  j["sv_normalized_rtf"] = r.sv_normalized_rtf;
  WriteText(fs::path(a.common.out) / "rtf.json", j.dump(2) + "\n");
}

}  // namespace

int RunCli(int argc, const char* const* argv) {
  CLI::App app{"Personalized keyword spotting and speaker verification", "pvt"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Args args;
  std::function<void(const Args&)> action;

  auto add = [&](const char* name, const char* help, std::function<void(const Args&)> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.common.config, "run configuration (TOML)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.common.out, "output directory")->required();
    sub->add_option("--seed", args.common.seed, "overrides the configured seeds");
    sub->callback([&action, fn] { action = fn; });
    return sub;
  };

  add("features", "dump log-mel features of a manifest", CmdFeatures)
      ->add_option("--manifest", args.manifest, "JSON-Lines manifest")->required();
  CLI::App* tk = add("train-kws", "train the keyword detector", CmdTrainKws);
  tk->add_option("--manifest", args.manifest, "training manifest")->required();
  tk->add_option("--val-manifest", args.val_manifest, "validation manifest (default: speaker split)");
  add("train-sv", "train a speaker embedding extractor", CmdTrainSv)
      ->add_option("--manifest", args.manifest, "training manifest")->required();
  CLI::App* ft = add("finetune-sv", "fine-tune a speaker extractor on the keyword spans of a manifest", CmdFinetuneSv);
  ft->add_option("--init", args.init, "pretrained speaker checkpoint")->required();
  ft->add_option("--manifest", args.manifest, "fine-tuning manifest")->required();
  CLI::App* de = add("detect", "run the keyword detector over a manifest", CmdDetect);
  de->add_option("--manifest", args.manifest, "manifest (default: [eval] test_manifest)");
  de->add_option("--kws", args.kws, "keyword checkpoint (default: [eval] kws_checkpoint)");
  add("enroll", "build speaker profiles", CmdEnroll)
      ->add_option("--manifest", args.manifest, "manifest (default: [eval] enroll_manifest)");
  CLI::App* sc = add("score", "score a trial list", CmdScore);
  sc->add_option("--trials", args.trials, "trial list (default: [eval] trials)");
  sc->add_option("--manifest", args.manifest, "test manifest (default: [eval] test_manifest)");
  CLI::App* ev = add("evaluate", "DET curve and detection cost of a trial list", CmdEvaluate);
  ev->add_option("--trials", args.trials, "trial list (default: [eval] trials)");
  ev->add_option("--scores", args.scores, "precomputed scores (default: score now)");
  ev->add_option("--manifest", args.manifest, "test manifest (default: [eval] test_manifest)");
  ev->add_option("--dev-cost", args.dev_cost, "cost.json of a development set; its threshold is applied");
  add("rtf", "measure real-time factors", CmdRtf)
      ->add_option("--manifest", args.manifest, "manifest (default: [eval] test_manifest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    action(args);
  } catch (const ValidationError& e) {
    std::cerr << "pvt: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "pvt: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pvt
