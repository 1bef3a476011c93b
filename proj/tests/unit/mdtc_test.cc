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
#include "pvt/mdtc.h"
#include "testing.h"

namespace pvt {
namespace {

MdtcConfig SmallConfig(int stacks) {
  MdtcConfig cfg;
  cfg.input_dim = 5;
  cfg.channels = 8;
  cfg.se_reduction = 2;
  cfg.stacks = stacks;
  return cfg;
}

TEST(Mdtc, DefaultParamCount) {
  const MdtcConfig cfg;
  EXPECT_EQ(AnalyticParamCount(cfg), 165249);
  EXPECT_EQ(MdtcModel<float>::Build(cfg, 1).NumParams(), 165249);
}

TEST(Mdtc, ParamCountTracksChannels) {
  MdtcConfig cfg;
  cfg.channels = 128;
  cfg.se_reduction = 8;
  EXPECT_EQ(MdtcModel<float>::Build(cfg, 1).NumParams(), AnalyticParamCount(cfg));
  // Hand count for C = 128, H = 16, D = 80, 16 blocks.
  const int64_t block = 128 * 5 + 2 * 128 * 128 + 6 * 128 + (2 * 128 * 16 + 16 + 128);
  EXPECT_EQ(AnalyticParamCount(cfg), 16 * block + 80 * 128 + 128 + 256 + 129);
}

TEST(Mdtc, ReceptiveFieldFormula) {
  EXPECT_EQ(ReceptiveField(MdtcConfig()), 241);
  EXPECT_EQ(ReceptiveField(SmallConfig(1)), 61);
  MdtcConfig one = SmallConfig(1);
  one.dilations = {1};
  EXPECT_EQ(ReceptiveField(one), 5);
}

// Perturbs input frame 0 and finds the last output frame it reaches.
int64_t ProbeReach(const MdtcConfig& cfg, int64_t frames) {
  const auto model = MdtcModel<double>::Build(cfg, 3);
  Rng rng(4);
  Tensor<double> x = testing::RandomTensor<double>({1, cfg.input_dim, frames}, &rng);
  const Tensor<double> y0 = model.Infer(x);
  for (int d = 0; d < cfg.input_dim; ++d) x[d * frames] += 0.5;
  const Tensor<double> y1 = model.Infer(x);
  int64_t last = -1;
  for (int64_t t = 0; t < frames; ++t) {
    if (y0[t] != y1[t]) last = t;
  }
  return last;
}

TEST(Mdtc, ReceptiveFieldMatchesProbe) {
  for (int stacks : {1, 2}) {
    const MdtcConfig cfg = SmallConfig(stacks);
    const int64_t rf = ReceptiveField(cfg);
    EXPECT_EQ(ProbeReach(cfg, rf + 30), rf - 1) << "stacks " << stacks;
  }
}

TEST(Mdtc, StreamingMatchesBatch) {
  const MdtcConfig cfg = SmallConfig(2);
  const auto model = MdtcModel<float>::Build(cfg, 5);
  Rng rng(6);
  const int64_t frames = 150;
  const Tensor<float> x = testing::RandomTensor<float>({1, cfg.input_dim, frames}, &rng);
  const Tensor<float> batch = model.Infer(x);
  auto st = model.NewStream();
  std::vector<float> frame(cfg.input_dim);
  for (int64_t t = 0; t < frames; ++t) {
    for (int d = 0; d < cfg.input_dim; ++d) frame[d] = x[d * frames + t];
    EXPECT_NEAR(model.StreamPush(&st, frame), batch[t], 1e-5) << "frame " << t;
  }
  EXPECT_EQ(st.frames(), frames);
}

TEST(Mdtc, InterleavedStreamsAreIndependent) {
  const MdtcConfig cfg = SmallConfig(1);
  const auto model = MdtcModel<float>::Build(cfg, 7);
  Rng rng(8);
  const int64_t frames = 40;
  const Tensor<float> a = testing::RandomTensor<float>({1, cfg.input_dim, frames}, &rng);
  const Tensor<float> b = testing::RandomTensor<float>({1, cfg.input_dim, frames}, &rng);
  const Tensor<float> ya = model.Infer(a), yb = model.Infer(b);
  auto sa = model.NewStream(), sb = model.NewStream();
  std::vector<float> fa(cfg.input_dim), fb(cfg.input_dim);
  for (int64_t t = 0; t < frames; ++t) {
    for (int d = 0; d < cfg.input_dim; ++d) {
      fa[d] = a[d * frames + t];
      fb[d] = b[d * frames + t];
    }
    EXPECT_NEAR(model.StreamPush(&sa, fa), ya[t], 1e-5);
    EXPECT_NEAR(model.StreamPush(&sb, fb), yb[t], 1e-5);
  }
}

TEST(Mdtc, StreamFromOtherConfigRejected) {
  const auto m1 = MdtcModel<float>::Build(SmallConfig(1), 1);
  const auto m2 = MdtcModel<float>::Build(SmallConfig(2), 1);
  auto st = m1.NewStream();
  std::vector<float> frame(5, 0.0f);
  EXPECT_THROW(m2.StreamPush(&st, frame), ValidationError);
  std::vector<float> short_frame(4, 0.0f);
  EXPECT_THROW(m1.StreamPush(&st, short_frame), ValidationError);
}

TEST(Mdtc, PosteriorsInUnitIntervalAndDeterministic) {
  const MdtcConfig cfg = SmallConfig(1);
  const auto m1 = MdtcModel<float>::Build(cfg, 9);
  const auto m2 = MdtcModel<float>::Build(cfg, 9);
  FeatureMatrix feat(60, 5);
  Rng rng(10);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  for (std::size_t t = 0; t < 60; ++t)
    for (std::size_t d = 0; d < 5; ++d) feat(t, d) = u(rng);
  const PosteriorTrack p = m1.Posteriors(feat);
  ASSERT_EQ(p.size(), 60u);
  for (float v : p.posteriors) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(p.posteriors, m2.Posteriors(feat).posteriors);
  const auto m3 = MdtcModel<float>::Build(cfg, 11);
  EXPECT_NE(p.posteriors, m3.Posteriors(feat).posteriors);
}

TEST(Mdtc, ForwardEvalEqualsInfer) {
  const MdtcConfig cfg = SmallConfig(1);
  auto model = MdtcModel<double>::Build(cfg, 12);
  Rng rng(13);
  const Tensor<double> x = testing::RandomTensor<double>({2, 5, 30}, &rng);
  const Tensor<double> y = model.Forward(x, Mode::kEval);
  const Tensor<double> z = model.Infer(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], z[i], 1e-12);
}

TEST(Mdtc, InvalidConfigRejected) {
  MdtcConfig cfg;
  cfg.kernel = 0;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = MdtcConfig();
  cfg.se_reduction = 7;
  EXPECT_THROW(cfg.Validate(), ValidationError);
  cfg = MdtcConfig();
  cfg.dilations.clear();
  EXPECT_THROW(cfg.Validate(), ValidationError);
}

}  // namespace
}  // namespace pvt
