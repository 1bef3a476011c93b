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

#ifndef PVT_CONFIG_H_
#define PVT_CONFIG_H_

#include <string>

#include "pvt/detector.h"
#include "pvt/eval.h"
#include "pvt/features.h"
#include "pvt/kws_train.h"
#include "pvt/mdtc.h"
#include "pvt/sv_model.h"
#include "pvt/sv_train.h"

namespace pvt {

// Offline noise / reverberation copies of the SV training utterances.
struct SvAugmentConfig {
  std::string noise_manifest;  // JSON-Lines manifest of noise recordings
  std::string rir_manifest;    // JSON-Lines manifest of impulse responses
  int copies = 0;              // augmented copies per utterance
  double snr_db_min = 0.0;
  double snr_db_max = 20.0;
};

struct EvalConfig {
  double alpha = kDefaultCostAlpha;
  std::string kws_checkpoint;
  std::string sv_checkpoint;
  std::string sv_checkpoint2;  // optional second system, fused by score mean
  std::string enroll_manifest;
  std::string test_manifest;
  std::string trials;
  int threads = 0;  // 0: PVT_THREADS or the hardware concurrency
};

// Run configuration, TOML sections [features] [mdtc] [kws_train] [detector]
// [sv] [eval]. Every key has a default; unknown sections and keys are
// rejected. The [sv] section holds both model and training keys; `preset`
// selects the base architecture before other keys override it.
struct RunConfig {
  FbankConfig features;
  MdtcConfig mdtc;
  KwsTrainConfig kws_train;
  DetectorConfig detector;
  std::string sv_preset = "resnet34se";
  SvConfig sv = SvConfig::Preset("resnet34se");
  SvTrainConfig sv_train;
  SvAugmentConfig sv_augment;
  EvalConfig eval;

  void Validate() const;
};

RunConfig ParseRunConfig(const std::string& toml_text, const std::string& origin = "<string>");
// Relative paths inside the file are resolved against its directory.
RunConfig LoadRunConfig(const std::string& path);

// Canonical JSON (sorted keys, fixed formatting) of what a checkpoint's
// parameters depend on. Hashed into the checkpoint.
std::string KwsModelConfigJson(const FbankConfig& features, const MdtcConfig& mdtc);
std::string SvModelConfigJson(const FbankConfig& features, const SvConfig& sv);

// Inverse of the above, used to rebuild a model from a checkpoint.
void ParseKwsModelConfigJson(const std::string& json, FbankConfig* features, MdtcConfig* mdtc);
void ParseSvModelConfigJson(const std::string& json, FbankConfig* features, SvConfig* sv);

}  // namespace pvt

#endif  // PVT_CONFIG_H_
