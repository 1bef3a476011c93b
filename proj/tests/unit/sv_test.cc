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

#include "gtest/gtest.h"
#include "pvt/sv_loss.h"
#include "pvt/sv_model.h"
#include "pvt/sv_train.h"
#include "testing.h"

namespace pvt {
namespace {

using testing::RandomTensor;

double Norm(const Tensor<double>& x, int64_t row) {
  double s = 0;
  for (int64_t k = 0; k < x.dim(1); ++k) s += x[row * x.dim(1) + k] * x[row * x.dim(1) + k];
  return std::sqrt(s);
}

double Cos(const Tensor<double>& a, int64_t i, const Tensor<double>& b, int64_t j) {
  double d = 0;
  for (int64_t k = 0; k < a.dim(1); ++k) d += a[i * a.dim(1) + k] * b[j * b.dim(1) + k];
  return d / (Norm(a, i) * Norm(b, j));
}

// Softmax cross-entropy over scaled cosines with the margin on the target.
double ArcFaceOracle(const Tensor<double>& e, const std::vector<int>& y, const Tensor<double>& w,
                     double s, double m) {
  double total = 0;
  for (int64_t i = 0; i < e.dim(0); ++i) {
    std::vector<double> logits;
    for (int64_t j = 0; j < w.dim(0); ++j) {
      const double c = Cos(e, i, w, j);
      // Past theta = pi the margin logit stays at its minimum -s.
      const double theta = std::min(std::acos(c) + m, M_PI);
      logits.push_back(j == y[i] ? s * std::cos(theta) : s * c);
    }
    double z = 0;
    for (double l : logits) z += std::exp(l);
    total += -logits[y[i]] + std::log(z);
  }
  return total / static_cast<double>(e.dim(0));
}

TEST(ArcFace, MatchesDirectFormula) {
  Rng rng(1);
  const Tensor<double> e = RandomTensor<double>({5, 4}, &rng);
  const Tensor<double> w = RandomTensor<double>({3, 4}, &rng);
  const std::vector<int> y = {0, 2, 1, 1, 0};
  for (double m : {0.0, 0.2, 0.5}) {
    EXPECT_NEAR(ArcFaceLoss(e, y, w, 8.0, m).loss, ArcFaceOracle(e, y, w, 8.0, m), 1e-9) << m;
  }
}

TEST(ArcFace, TwoClassHandExample) {
  // Unit embedding on class 0's axis: cosines (1, 0). With s = 2, m = 0 the
  // loss is log(1 + e^-2).
  const Tensor<double> e({1, 2}, std::vector<double>{3, 0});
  const Tensor<double> w({2, 2}, std::vector<double>{1, 0, 0, 5});
  const auto r = ArcFaceLoss(e, {0}, w, 2.0, 0.0);
  EXPECT_NEAR(r.loss, std::log(1 + std::exp(-2.0)), 1e-12);
  EXPECT_EQ(r.correct, 1);
  // Margin 0.5: target logit 2 cos(0.5).
  const auto rm = ArcFaceLoss(e, {0}, w, 2.0, 0.5);
  const double t = 2 * std::cos(0.5);
  EXPECT_NEAR(rm.loss, std::log(std::exp(t) + 1.0) - t, 1e-12);
}

TEST(ArcFace, LossGrowsWithMargin) {
  Rng rng(2);
  const Tensor<double> e = RandomTensor<double>({6, 5}, &rng);
  const Tensor<double> w = RandomTensor<double>({4, 5}, &rng);
  const std::vector<int> y = {0, 1, 2, 3, 0, 1};
  double prev = ArcFaceLoss(e, y, w, 16.0, 0.0).loss;
  for (double m : {0.1, 0.2, 0.3, 0.4}) {
    const double l = ArcFaceLoss(e, y, w, 16.0, m).loss;
    EXPECT_GT(l, prev);
    prev = l;
  }
  EXPECT_THROW(ArcFaceLoss(e, {0, 1, 2, 4, 0, 1}, w, 16.0, 0.2), ValidationError);
}

// Double loop over anchors and candidates.
double SupConOracle(const Tensor<double>& e, const std::vector<int>& y, double tau) {
  const int64_t n = e.dim(0);
  double total = 0;
  int anchors = 0;
  for (int64_t i = 0; i < n; ++i) {
    double denom = 0;
    for (int64_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(Cos(e, i, e, a) / tau);
    double acc = 0;
    int pos = 0;
    for (int64_t p = 0; p < n; ++p) {
      if (p == i || y[p] != y[i]) continue;
      acc += Cos(e, i, e, p) / tau - std::log(denom);
      ++pos;
    }
    if (pos == 0) continue;
    total += -acc / pos;
    ++anchors;
  }
  return total / anchors;
}

TEST(SupCon, MatchesDoubleLoopOracle) {
  Rng rng(3);
  const Tensor<double> e = RandomTensor<double>({7, 4}, &rng);
  const std::vector<int> y = {0, 0, 1, 1, 1, 2, 3};
  const auto r = SupConLoss(e, y, 0.3);
  EXPECT_EQ(r.anchors, 5);
  EXPECT_NEAR(r.loss, SupConOracle(e, y, 0.3), 1e-9);
}

TEST(SupCon, IdenticalEmbeddingsGiveLogNMinusOne) {
  const Tensor<double> e({5, 3}, 1.0);
  const auto r = SupConLoss(e, {0, 0, 1, 1, 1}, 0.07);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-9);
  // No anchor with a positive is a caller error.
  EXPECT_THROW(SupConLoss(e, {0, 1, 2, 3, 4}, 0.07), ValidationError);
}

TEST(SvLoss, TotalIsWeightedSum) {
  EXPECT_DOUBLE_EQ(SvTotalLoss(1.5, 2.0, 1.0), 3.5);
  EXPECT_DOUBLE_EQ(SvTotalLoss(1.5, 2.0, 0.5), 2.5);
}

TEST(Pooling, ZeroAttentionIsUniform) {
  Rng rng(4);
  const Tensor<double> h = RandomTensor<double>({2, 3, 6}, &rng);
  const Tensor<double> w({4, 3}), b({4}), v({4});
  const auto asp = AttentionPoolForward(h, w, b, v, true, 1e-9,
                                        static_cast<AttentionPoolCache<double>*>(nullptr));
  const auto sap = AttentionPoolForward(h, w, b, v, false, 1e-9,
                                        static_cast<AttentionPoolCache<double>*>(nullptr));
  ASSERT_EQ(asp.shape(), (Shape{2, 6}));
  ASSERT_EQ(sap.shape(), (Shape{2, 3}));
  for (int64_t bb = 0; bb < 2; ++bb)
    for (int64_t d = 0; d < 3; ++d) {
      double s = 0, s2 = 0;
      for (int64_t t = 0; t < 6; ++t) {
        const double x = h[(bb * 3 + d) * 6 + t];
        s += x;
        s2 += x * x;
      }
      const double mu = s / 6, sd = std::sqrt(s2 / 6 - mu * mu);
      EXPECT_NEAR(asp[bb * 6 + d], mu, 1e-12);
      EXPECT_NEAR(asp[bb * 6 + 3 + d], sd, 1e-9);
      EXPECT_NEAR(sap[bb * 3 + d], mu, 1e-12);
    }
}

TEST(Scoring, EnrollCosineFuse) {
  Embedding a{{3.0f, 4.0f}, false}, b{{6.0f, 8.0f}, false}, c{{0.0f, 1.0f}, false};
  const EnrollmentProfile p = Enroll("s", {a, b});
  EXPECT_NEAR(p.vector[0], 0.6f, 1e-6);
  EXPECT_NEAR(p.vector[1], 0.8f, 1e-6);
  EXPECT_NEAR(CosineScore(p, c), 0.8, 1e-6);
  EXPECT_NEAR(CosineScore({1.0f, 0.0f}, {-2.0f, 0.0f}), -1.0, 1e-12);
  EXPECT_EQ(CosineScore({0.0f, 0.0f}, {1.0f, 0.0f}), 0.0);
  EXPECT_DOUBLE_EQ(FuseScores(0.2, 0.6), 0.4);
  EXPECT_THROW(Enroll("s", {}), ValidationError);
  EXPECT_THROW(CosineScore({1.0f}, {1.0f, 2.0f}), ValidationError);
}

TEST(SvSchedule, StepDecay) {
  EXPECT_DOUBLE_EQ(SvLearningRate(0.1, 5, 0.1, 0), 0.1);
  EXPECT_DOUBLE_EQ(SvLearningRate(0.1, 5, 0.1, 4), 0.1);
  EXPECT_NEAR(SvLearningRate(0.1, 5, 0.1, 5), 0.01, 1e-15);
  EXPECT_NEAR(SvLearningRate(0.1, 5, 0.1, 12), 0.001, 1e-15);
}

TEST(SvModel, PresetShapes) {
  const SvConfig full = SvConfig::Preset("resnet34se");
  EXPECT_EQ(full.num_blocks(), 16);
  EXPECT_EQ(full.output_freq(), 10);
  EXPECT_THROW(SvConfig::Preset("resnet9000"), ValidationError);
  const SvConfig tiny = SvConfig::Preset("tiny");
  const auto model = SvModel<float>::Build(tiny, 3, 1);
  FeatureMatrix f(37, 80);
  Rng rng(5);
  std::normal_distribution<float> g;
  for (std::size_t t = 0; t < 37; ++t)
    for (std::size_t d = 0; d < 80; ++d) f(t, d) = g(rng);
  const Embedding e = EmbedUtterance(model, f);
  ASSERT_EQ(e.vector.size(), 64u);
  double n = 0;
  for (float v : e.vector) n += v * v;
  EXPECT_NEAR(n, 1.0, 1e-5);
  EXPECT_TRUE(e.normalized);
  // Same seed, same embedding.
  EXPECT_EQ(EmbedUtterance(SvModel<float>::Build(tiny, 3, 1), f).vector, e.vector);
  EXPECT_THROW(EmbedUtterance(model, FeatureMatrix(10, 40)), ValidationError);
}

std::vector<SvExample> ToySpeakers(int n_speakers, int per_speaker, Rng* rng) {
  std::normal_distribution<float> g(0.0f, 0.5f);
  std::vector<SvExample> out;
  for (int s = 0; s < n_speakers; ++s)
    for (int k = 0; k < per_speaker; ++k) {
      SvExample ex;
      ex.utt_id = "s" + std::to_string(s) + "_" + std::to_string(k);
      ex.label = s;
      ex.features = FeatureMatrix(30, 16);
      for (std::size_t t = 0; t < 30; ++t)
        for (std::size_t d = 0; d < 16; ++d)
          ex.features(t, d) = g(*rng) + (static_cast<int>(d) % n_speakers == s ? 1.5f : 0.0f);
      out.push_back(std::move(ex));
    }
  return out;
}

SvConfig ToySv() {
  SvConfig cfg = SvConfig::Preset("tiny");
  cfg.input_dim = 16;
  cfg.stem_channels = 4;
  cfg.stages = {{4, 1, 1}, {8, 1, 2}};
  cfg.se_reduction = 2;
  cfg.attention_dim = 8;
  cfg.embedding_dim = 8;
  cfg.arcface_scale = 8.0;
  cfg.supcon_temperature = 0.5;
  return cfg;
}

SvTrainConfig ToyTrain() {
  SvTrainConfig cfg;
  cfg.lr = 0.05;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.crop_frames = 20;
  cfg.seed = 9;
  cfg.finetune_epochs = 2;
  return cfg;
}

TEST(TrainSv, LossFallsAndIsDeterministic) {
  Rng rng(6);
  const auto exs = ToySpeakers(3, 8, &rng);
  auto m1 = SvModel<float>::Build(ToySv(), 3, 2);
  auto m2 = SvModel<float>::Build(ToySv(), 3, 2);
  const SvTrainReport r1 = TrainSv(&m1, exs, ToyTrain());
  const SvTrainReport r2 = TrainSv(&m2, exs, ToyTrain());
  ASSERT_EQ(r1.epochs.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(r1.epochs[i].loss, r2.epochs[i].loss);
  EXPECT_LT(r1.epochs.back().loss, r1.epochs.front().loss);
  EXPECT_NEAR(r1.epochs[0].lr, 0.05, 1e-12);
}

// Phase one updates only the head and keeps batch-norm statistics fixed.
TEST(FinetuneSv, FrozenPhaseTouchesOnlyHead) {
  for (FreezePolicy policy : {FreezePolicy::kClassifier, FreezePolicy::kClassifierAndEmbedding}) {
    Rng rng(7);
    const auto exs = ToySpeakers(2, 6, &rng);
    auto model = SvModel<float>::Build(ToySv(), 2, 3);
    const auto before = model;
    SvTrainConfig cfg = ToyTrain();
    cfg.finetune_switch_loss = 0.0;  // never leaves phase one
    cfg.freeze = policy;
    const SvTrainReport r = FinetuneSv(&model, exs, cfg);
    EXPECT_EQ(r.switch_epoch, 0);
    for (const auto& rec : r.epochs) EXPECT_EQ(rec.phase, 1);
    auto after_store = model.Params();
    auto before_copy = before;
    auto before_store = before_copy.Params();
    bool head_moved = false;
    for (std::size_t i = 0; i < after_store.params().size(); ++i) {
      const std::string& name = after_store.params()[i].name;
      const bool head = SvModel<float>::IsClassifierParam(name) ||
                        (policy == FreezePolicy::kClassifierAndEmbedding &&
                         SvModel<float>::IsEmbeddingParam(name));
      const bool same =
          after_store.params()[i].param->value == before_store.params()[i].param->value;
      if (head) {
        head_moved = head_moved || !same;
      } else {
        EXPECT_TRUE(same) << name;
      }
    }
    EXPECT_TRUE(head_moved);
    for (std::size_t i = 0; i < after_store.buffers().size(); ++i) {
      EXPECT_EQ(*after_store.buffers()[i].buffer, *before_store.buffers()[i].buffer)
          << after_store.buffers()[i].name;
    }
  }
}

TEST(FinetuneSv, SwitchesToFullTraining) {
  Rng rng(8);
  const auto exs = ToySpeakers(2, 6, &rng);
  auto model = SvModel<float>::Build(ToySv(), 2, 3);
  SvTrainConfig cfg = ToyTrain();
  cfg.finetune_switch_loss = 1e9;  // switch after the first epoch
  cfg.finetune_epochs = 3;
  const SvTrainReport r = FinetuneSv(&model, exs, cfg);
  EXPECT_EQ(r.switch_epoch, 1);
  EXPECT_EQ(r.epochs[0].phase, 1);
  EXPECT_EQ(r.epochs[1].phase, 2);
  EXPECT_EQ(r.epochs[2].phase, 2);
}

}  // namespace
}  // namespace pvt
