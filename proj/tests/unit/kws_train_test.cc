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

#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "pvt/kws_train.h"
#include "testing.h"

namespace pvt {
namespace {

TEST(Bce, HandValues) {
  EXPECT_NEAR(BceFrame(0.5, 1.0, 1e-7), std::log(2.0), 1e-15);
  EXPECT_NEAR(BceFrame(0.5, 0.0, 1e-7), std::log(2.0), 1e-15);
  EXPECT_NEAR(BceFrameGrad(0.5, 1.0, 1e-7), -2.0, 1e-15);
  EXPECT_NEAR(BceFrameGrad(0.5, 0.0, 1e-7), 2.0, 1e-15);
  // Saturated outputs are clamped, so the loss stays finite.
  EXPECT_NEAR(BceFrame(0.0, 1.0, 1e-7), -std::log(1e-7), 1e-9);
  EXPECT_TRUE(std::isfinite(BceFrameGrad(1.0, 0.0, 1e-7)));
}

TEST(Bce, WeightedMeanAndGradient) {
  const Tensor<double> y({1, 3}, std::vector<double>{0.5, 0.9, 0.2});
  const Tensor<float> t({1, 3}, std::vector<float>{1, 1, 0});
  const Tensor<float> w({1, 3}, std::vector<float>{1, 0, 1});
  const BceResult<double> r = BceLoss(y, t, w, 1e-7);
  EXPECT_EQ(r.weight_sum, 2.0);
  EXPECT_NEAR(r.loss, (std::log(2.0) - std::log(0.8)) / 2, 1e-12);
  EXPECT_NEAR(r.grad[0], -2.0 / 2, 1e-12);
  EXPECT_EQ(r.grad[1], 0.0);
  EXPECT_NEAR(r.grad[2], (1 / 0.8) / 2, 1e-12);
}

TEST(Bce, AllZeroWeightsGiveZeroLossAndGrad) {
  const Tensor<double> y({2, 2}, 0.3);
  const BceResult<double> r =
      BceLoss(y, Tensor<float>({2, 2}, 1.0f), Tensor<float>({2, 2}, 0.0f), 1e-7);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.weight_sum, 0.0);
  for (double g : r.grad.vec()) EXPECT_EQ(g, 0.0);
}

TEST(Schedule, PlateauDecay) {
  double lr = 0.002;
  lr = PlateauLr({1.0}, lr, 0.7);
  EXPECT_DOUBLE_EQ(lr, 0.002);
  lr = PlateauLr({1.0, 0.9}, lr, 0.7);
  EXPECT_DOUBLE_EQ(lr, 0.002);
  lr = PlateauLr({1.0, 0.9, 0.95}, lr, 0.7);
  EXPECT_NEAR(lr, 0.0014, 1e-15);
  lr = PlateauLr({1.0, 0.9, 0.95, 0.9}, lr, 0.7);
  EXPECT_NEAR(lr, 0.00098, 1e-15);
}

TEST(Schedule, EarlyStopNeedsMinEpochsAndNoGain) {
  const std::vector<double> stalled = {1.0, 0.8, 0.85};
  EXPECT_FALSE(EarlyStop(stalled, 3, 15));
  EXPECT_TRUE(EarlyStop(stalled, 15, 15));
  EXPECT_FALSE(EarlyStop({1.0, 0.8, 0.7}, 20, 15));
}

std::vector<ManifestEntry> Speakers(int n_speakers, int per_speaker) {
  std::vector<ManifestEntry> out;
  for (int s = 0; s < n_speakers; ++s)
    for (int k = 0; k < per_speaker; ++k) {
      ManifestEntry e;
      e.speaker_id = "spk" + std::to_string(s);
      e.utt_id = e.speaker_id + "_" + std::to_string(k);
      out.push_back(e);
    }
  return out;
}

TEST(Split, HoldsOutWholeSpeakers) {
  const auto [train, val] = SplitTrainVal(Speakers(20, 3), 0.1, 1);
  std::set<std::string> tr, va;
  for (const auto& e : train) tr.insert(e.speaker_id);
  for (const auto& e : val) va.insert(e.speaker_id);
  EXPECT_EQ(va.size(), 2u);
  EXPECT_EQ(tr.size(), 18u);
  EXPECT_EQ(val.size(), 6u);
  for (const auto& s : va) EXPECT_EQ(tr.count(s), 0u);
  // At least one speaker is held out even when the fraction rounds to zero.
  EXPECT_EQ(SplitTrainVal(Speakers(5, 2), 0.1, 1).second.size(), 2u);
  // Same seed, same split.
  EXPECT_EQ(SplitTrainVal(Speakers(20, 3), 0.1, 1).second.front().speaker_id,
            val.front().speaker_id);
  EXPECT_THROW(SplitTrainVal(Speakers(1, 4), 0.1, 1), ValidationError);
}

// Tiny separable task: positive frames carry a bump in feature 0.
std::vector<LabeledExample> ToyExamples(int n, Rng* rng) {
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<LabeledExample> out;
  for (int i = 0; i < n; ++i) {
    LabeledExample ex;
    ex.utt_id = "toy" + std::to_string(i);
    const bool pos = i % 2 == 0;
    ex.features = FeatureMatrix(30, 4);
    for (std::size_t t = 0; t < 30; ++t)
      for (std::size_t d = 0; d < 4; ++d) ex.features(t, d) = g(*rng);
    if (pos)
      for (std::size_t t = 10; t < 20; ++t) ex.features(t, 0) += 2.0f;
    LabelFrames(30, pos, 10, 20, &ex.targets, &ex.weights);
    out.push_back(std::move(ex));
  }
  return out;
}

MdtcConfig ToyModel() {
  MdtcConfig cfg;
  cfg.input_dim = 4;
  cfg.channels = 8;
  cfg.stacks = 1;
  cfg.dilations = {1, 2};
  cfg.kernel = 3;
  cfg.se_reduction = 2;
  return cfg;
}

KwsTrainConfig ToyTrain() {
  KwsTrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 4;
  cfg.max_epochs = 8;
  cfg.min_epochs = 8;
  cfg.seed = 3;
  return cfg;
}

TEST(TrainKws, LossDecreasesAndRunIsDeterministic) {
  Rng rng(2);
  const auto train = ToyExamples(12, &rng);
  const auto val = ToyExamples(4, &rng);
  auto m1 = MdtcModel<float>::Build(ToyModel(), 5);
  auto m2 = MdtcModel<float>::Build(ToyModel(), 5);
  const double before = EvaluateLoss(m1, val, ToyTrain());
  const TrainReport r1 = TrainKws(&m1, train, val, ToyTrain());
  const TrainReport r2 = TrainKws(&m2, train, val, ToyTrain());
  ASSERT_EQ(r1.epochs.size(), r2.epochs.size());
  for (std::size_t i = 0; i < r1.epochs.size(); ++i) {
    EXPECT_EQ(r1.epochs[i].train_loss, r2.epochs[i].train_loss);
    EXPECT_EQ(r1.epochs[i].val_loss, r2.epochs[i].val_loss);
  }
  EXPECT_LT(EvaluateLoss(m1, val, ToyTrain()), before);
  // The returned model is the best-validation one.
  EXPECT_NEAR(EvaluateLoss(m1, val, ToyTrain()), r1.epochs[r1.best_epoch - 1].val_loss, 1e-6);
  EXPECT_FALSE(r1.ToJsonl().empty());
}

TEST(TrainKws, ZeroWeightBatchLeavesModelUnchanged) {
  Rng rng(4);
  auto exs = ToyExamples(2, &rng);
  for (auto& ex : exs) std::fill(ex.weights.begin(), ex.weights.end(), 0.0f);
  auto model = MdtcModel<float>::Build(ToyModel(), 6);
  KwsTrainConfig cfg = ToyTrain();
  cfg.spec_augment = false;
  OptimizerState<float> opt = MakeAdam<float>(cfg.lr);
  Rng erng(1);
  EXPECT_EQ(TrainEpoch(&model, exs, &opt, cfg, &erng), 0.0);
  // Batch-norm running statistics may move; the trainable weights may not.
  auto p = model.Params();
  auto fresh = MdtcModel<float>::Build(ToyModel(), 6);
  auto q = fresh.Params();
  for (std::size_t i = 0; i < p.params().size(); ++i) {
    EXPECT_EQ(p.params()[i].param->value, q.params()[i].param->value) << p.params()[i].name;
  }
}

TEST(TrainConfig, ValidationRanges) {
  KwsTrainConfig cfg;
  EXPECT_NO_THROW(cfg.Validate());
  cfg.val_fraction = 1.0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = KwsTrainConfig();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = KwsTrainConfig();
  cfg.decay_factor = 1.5;
  EXPECT_THROW(cfg.Validate(), ValidationError);
}

}  // namespace
}  // namespace pvt
