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

#ifndef PVT_SV_TRAIN_H_
#define PVT_SV_TRAIN_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pvt/sv_model.h"

namespace pvt {

enum class FreezePolicy { kClassifier, kClassifierAndEmbedding };

FreezePolicy ParseFreezePolicy(const std::string& name);
std::string FreezePolicyName(FreezePolicy policy);

struct SvTrainConfig {
  double lr = 0.1;
  int lr_step_epochs = 5;
  double lr_decay = 0.1;
  int epochs = 30;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double grad_clip = 5.0;  // <= 0 disables
  int batch_size = 64;
  int crop_frames = 200;
  uint64_t seed = 0;

  double finetune_lr = 0.01;
  int finetune_epochs = 20;
  double finetune_switch_loss = 0.2;
  FreezePolicy freeze = FreezePolicy::kClassifierAndEmbedding;

  void Validate() const;
};

// base * decay^floor(epoch / step); epochs count from 0.
double SvLearningRate(double base, int step_epochs, double decay, int epoch);

struct SvExample {
  std::string utt_id;
  FeatureMatrix features;
  int label = 0;
};

struct SvEpochRecord {
  int epoch = 0;
  int phase = 0;  // 0 pretraining, 1 frozen finetune, 2 full finetune
  double lr = 0.0;
  double loss = 0.0;
  double arcface = 0.0;
  double supcon = 0.0;
  double accuracy = 0.0;
};

struct SvTrainReport {
  std::vector<SvEpochRecord> epochs;
  int switch_epoch = 0;  // first full-finetune epoch; 0 if never reached

  std::string ToJsonl() const;
};

using SvEpochCallback = std::function<void(const SvEpochRecord&)>;

// Step-decayed SGD on arcface + lambda * supcon over random crops.
SvTrainReport TrainSv(SvModel<float>* model, const std::vector<SvExample>& examples,
                      const SvTrainConfig& cfg, const SvEpochCallback& on_epoch = {});

// Trains only the final layers (per cfg.freeze, extractor in eval mode) until
// an epoch's mean loss is <= cfg.finetune_switch_loss, then all parameters.
// The class weights are reset when the label count differs from the model's.
SvTrainReport FinetuneSv(SvModel<float>* model, const std::vector<SvExample>& examples,
                         const SvTrainConfig& cfg, const SvEpochCallback& on_epoch = {});

}  // namespace pvt

#endif  // PVT_SV_TRAIN_H_
