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

#ifndef PVT_KWS_TRAIN_H_
#define PVT_KWS_TRAIN_H_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pvt/kws_data.h"
#include "pvt/mdtc.h"
#include "pvt/optim.h"

namespace pvt {

struct KwsTrainConfig {
  double lr = 0.002;
  int batch_size = 150;
  double decay_factor = 0.7;
  int min_epochs = 15;
  int max_epochs = 100;
  bool early_stopping = true;
  double loss_clamp = 1e-7;
  double grad_clip = 5.0;  // <= 0 disables
  double val_fraction = 0.1;  // 0: no held-out speakers, monitor the training loss
  bool spec_augment = true;
  AugmentConfig augment;
  // Copies of each training-mix component generated per positive utterance.
  int variant1 = 1;
  int variant2 = 1;
  int variant3 = 1;
  int negative_cuts = 1;
  uint64_t seed = 0;

  void Validate() const;
};

// Frame loss w * (-y* ln y - (1 - y*) ln(1 - y)) with y clamped to
// [eps, 1 - eps]; the gradient is taken at the clamped value.
double BceFrame(double y, double target, double eps);
double BceFrameGrad(double y, double target, double eps);

template <typename T>
struct BceResult {
  double loss = 0.0;        // weighted mean over frames with weight > 0
  double weight_sum = 0.0;
  Tensor<T> grad;           // d loss / d y, same shape as y
};

template <typename T>
BceResult<T> BceLoss(const Tensor<T>& y, const Tensor<float>& targets,
                     const Tensor<float>& weights, double eps);

// New learning rate after an epoch whose validation loss is the last entry of
// val_history: lr * decay when it is not below the best earlier value.
double PlateauLr(const std::vector<double>& val_history, double lr, double decay);

// True iff epoch >= min_epochs and the last validation loss is not below the
// best earlier value. Epochs count from 1.
bool EarlyStop(const std::vector<double>& val_history, int epoch, int min_epochs);

// Splits by speaker: round(fraction * n_speakers) speakers, at least 1, are
// held out. Needs at least two distinct speakers.
std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> SplitTrainVal(
    const std::vector<ManifestEntry>& entries, double fraction, uint64_t seed);

// Labeled training examples for a manifest: every utterance as is, plus the
// configured numbers of composed variants and negative cuts per positive.
// Negative utterances serve as the filler pool.
std::vector<LabeledExample> BuildKwsExamples(const std::vector<ManifestEntry>& entries,
                                             const FbankConfig& fbank,
                                             const KwsTrainConfig& cfg, Rng* rng);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  int best_epoch = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int stopped_epoch = 0;
  int best_epoch = 0;

  std::string ToJsonl() const;
};

// One pass in train mode over shuffled mini-batches; returns the weighted
// mean BCE. Batches with no weighted frame are skipped.
double TrainEpoch(MdtcModel<float>* model, const std::vector<LabeledExample>& examples,
                  OptimizerState<float>* opt, const KwsTrainConfig& cfg, Rng* rng);

// Weighted mean BCE in eval mode.
double EvaluateLoss(const MdtcModel<float>& model, const std::vector<LabeledExample>& examples,
                    const KwsTrainConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam with plateau decay and early stopping on the validation loss (the
// training loss when val is empty). The model ends up holding the parameters
// of the best epoch.
TrainReport TrainKws(MdtcModel<float>* model, const std::vector<LabeledExample>& train,
                     const std::vector<LabeledExample>& val, const KwsTrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

}  // namespace pvt

#endif  // PVT_KWS_TRAIN_H_
