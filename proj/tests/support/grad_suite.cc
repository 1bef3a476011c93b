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

#include "grad_suite.h"

#include "pvt/kws_train.h"
#include "pvt/layers.h"
#include "pvt/mdtc.h"
#include "pvt/sv_loss.h"
#include "pvt/sv_model.h"
#include "testing.h"

namespace pvt::testing {

namespace {

using D = double;
using Fn = std::function<Tensor<D>(const Tensor<D>&)>;

void Randomize(const ParamStore<D>& store, Rng* rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (const auto& p : store.params()) {
    for (std::size_t i = 0; i < p.param->value.size(); ++i) p.param->value[i] = u(*rng);
  }
}

// Checks d sum(r * fwd(x)) against bwd(r) for x and every param in store.
GradCheckReport CheckModule(Tensor<D> x, const Fn& fwd, const Fn& bwd, ParamStore<D> store,
                            Rng* rng) {
  const Tensor<D> y = fwd(x);
  const Tensor<D> r = RandomTensor<D>(y.shape(), rng);
  store.ZeroGrad();
  const Tensor<D> dx = bwd(r);
  std::vector<GradCheckTarget> targets = {{"input", &x, &dx}};
  for (const auto& p : store.params()) {
    targets.push_back({p.name, &p.param->value, &p.param->grad});
  }
  return GradCheck([&] { return Dot(fwd(x), r); }, targets);
}

GradCheckReport CheckKernel(Tensor<D> x, const Fn& fwd,
                            const std::function<Tensor<D>(const Tensor<D>&, const Tensor<D>&,
                                                          const Tensor<D>&)>& bwd,
                            Rng* rng) {
  const Tensor<D> y = fwd(x);
  const Tensor<D> r = RandomTensor<D>(y.shape(), rng);
  const Tensor<D> dx = bwd(x, y, r);
  return GradCheck([&] { return Dot(fwd(x), r); }, {{"input", &x, &dx}});
}

template <typename Layer>
GradCase LayerCase(std::string name, std::function<Layer()> make, Shape x_shape) {
  return {name, [make, x_shape](uint64_t seed) {
            Rng rng(seed);
            Layer layer = make();
            ParamStore<D> store;
            layer.Register(&store, "layer");
            Randomize(store, &rng);
            return CheckModule(RandomTensor<D>(x_shape, &rng), [&](const Tensor<D>& x) { return layer.Forward(x); },
                               [&](const Tensor<D>& dy) { return layer.Backward(dy); }, store, &rng);
          }};
}

GradCase BatchNormCase() {
  return {"batch_norm_train", [](uint64_t seed) {
            Rng rng(seed);
            BatchNorm<D> bn(3);
            ParamStore<D> store;
            bn.Register(&store, "bn");
            Randomize(store, &rng, 0.5, 1.5);
            return CheckModule(RandomTensor<D>({3, 3, 4}, &rng),
                               [&](const Tensor<D>& x) { return bn.Forward(x, Mode::kTrain); },
                               [&](const Tensor<D>& dy) { return bn.Backward(dy); }, store, &rng);
          }};
}

GradCase ActivationCase(std::string name, Activation kind) {
  return {name, [kind](uint64_t seed) {
            Rng rng(seed);
            const Shape shape = {2, 3, 4};
            auto fwd = [kind](const Tensor<D>& x) {
              return kind == Activation::kSoftmax ? Softmax(x, 1) : Activate(x, kind);
            };
            auto bwd = [kind](const Tensor<D>& x, const Tensor<D>& y, const Tensor<D>& dy) {
              switch (kind) {
                case Activation::kRelu: return ReluBackward(x, dy);
                case Activation::kSigmoid: return SigmoidBackward(y, dy);
                case Activation::kTanh: return TanhBackward(y, dy);
                case Activation::kSoftmax: return SoftmaxBackward(y, dy, 1);
              }
              return Tensor<D>();
            };
            return CheckKernel(RandomTensor<D>(shape, &rng, -2.0, 2.0), fwd, bwd, &rng);
          }};
}

GradCase L2NormalizeCase() {
  return {"l2_normalize", [](uint64_t seed) {
            Rng rng(seed);
            return CheckKernel(
                RandomTensor<D>({3, 4}, &rng),
                [](const Tensor<D>& x) { return L2NormalizeForward(x, 1e-12); },
                [](const Tensor<D>& x, const Tensor<D>& y, const Tensor<D>& dy) {
                  return L2NormalizeBackward(x, y, dy, 1e-12);
                },
                &rng);
          }};
}

GradCase BceCase() {
  return {"bce_loss", [](uint64_t seed) {
            Rng rng(seed);
            Tensor<D> y = RandomTensor<D>({2, 6}, &rng, 0.05, 0.95);
            Tensor<float> targets({2, 6});
            Tensor<float> weights({2, 6});
            std::bernoulli_distribution coin(0.5);
            for (std::size_t i = 0; i < targets.size(); ++i) {
              targets[i] = coin(rng) ? 1.0f : 0.0f;
              weights[i] = coin(rng) ? 1.0f : 0.0f;
            }
            weights[0] = 1.0f;
            const Tensor<D> grad = BceLoss(y, targets, weights, 1e-7).grad;
            return GradCheck([&] { return BceLoss(y, targets, weights, 1e-7).loss; },
                             {{"posteriors", &y, &grad}});
          }};
}

GradCase ArcFaceCase() {
  return {"arcface_loss", [](uint64_t seed) {
            Rng rng(seed);
            Tensor<D> emb = RandomTensor<D>({5, 4}, &rng);
            Tensor<D> w = RandomTensor<D>({3, 4}, &rng);
            const std::vector<int> labels = {0, 1, 2, 1, 0};
            const auto res = ArcFaceLoss(emb, labels, w, 4.0, 0.2);
            return GradCheck([&] { return ArcFaceLoss(emb, labels, w, 4.0, 0.2).loss; },
                             {{"embeddings", &emb, &res.d_emb}, {"class_weights", &w, &res.d_weights}});
          }};
}

GradCase SupConCase() {
  return {"supcon_loss", [](uint64_t seed) {
            Rng rng(seed);
            Tensor<D> emb = RandomTensor<D>({6, 4}, &rng);
            const std::vector<int> labels = {0, 0, 1, 1, 2, 0};
            const auto res = SupConLoss(emb, labels, 0.5);
            return GradCheck([&] { return SupConLoss(emb, labels, 0.5).loss; },
                             {{"embeddings", &emb, &res.d_emb}});
          }};
}

GradCase MdtcCase() {
  return {"mdtc_network", [](uint64_t seed) {
            Rng rng(seed);
            MdtcConfig cfg;
            cfg.input_dim = 5;
            cfg.channels = 4;
            cfg.stacks = 2;
            cfg.dilations = {1, 2};
            cfg.kernel = 3;
            cfg.se_reduction = 2;
            cfg.se_window = 3;
            auto model = MdtcModel<D>::Build(cfg, seed);
            const ParamStore<D> store = model.Params();
            return CheckModule(RandomTensor<D>({2, 5, 9}, &rng),
                               [&](const Tensor<D>& x) { return model.Forward(x, Mode::kTrain); },
                               [&](const Tensor<D>& dy) { return model.Backward(dy); }, store, &rng);
          }};
}

GradCase SvCase(std::string name, PoolingKind pooling) {
  return {name, [pooling](uint64_t seed) {
            Rng rng(seed);
            SvConfig cfg;
            cfg.input_dim = 6;
            cfg.stem_channels = 2;
            cfg.stages = {{2, 1, 1}, {4, 1, 2}};
            cfg.se_reduction = 2;
            cfg.pooling = pooling;
            cfg.attention_dim = 3;
            cfg.embedding_dim = 3;
            auto model = SvModel<D>::Build(cfg, 3, seed);
            const ParamStore<D> store = model.Params();
            return CheckModule(RandomTensor<D>({2, 6, 7}, &rng),
                               [&](const Tensor<D>& x) { return model.Forward(x, Mode::kTrain); },
                               [&](const Tensor<D>& dy) { return model.Backward(dy); }, store, &rng);
          }};
}

}  // namespace

std::vector<GradCase> GradCases() {
  std::vector<GradCase> cases;
  cases.push_back(LayerCase<DepthwiseConv1d<D>>(
      "depthwise_conv_causal", [] { return DepthwiseConv1d<D>(3, 3, 2, true); }, {2, 3, 9}));
  cases.push_back(LayerCase<DepthwiseConv1d<D>>(
      "depthwise_conv_centered", [] { return DepthwiseConv1d<D>(3, 3, 1, false); }, {2, 3, 7}));
  cases.push_back(LayerCase<PointwiseConv1d<D>>(
      "pointwise_conv", [] { return PointwiseConv1d<D>(3, 4, true); }, {2, 3, 5}));
  cases.push_back(LayerCase<Conv2d<D>>(
      "conv2d_stride1", [] { return Conv2d<D>(2, 3, 3, 1, 1); }, {2, 2, 5, 4}));
  cases.push_back(LayerCase<Conv2d<D>>(
      "conv2d_stride2", [] { return Conv2d<D>(2, 3, 3, 2, 1); }, {2, 2, 6, 5}));
  cases.push_back(LayerCase<Dense<D>>("dense", [] { return Dense<D>(4, 3); }, {5, 4}));
  cases.push_back(LayerCase<SeGate<D>>(
      "se_gate_causal_window", [] { return SeGate<D>(4, 2, 3); }, {2, 4, 6}));
  cases.push_back(LayerCase<SeGate<D>>(
      "se_gate_global", [] { return SeGate<D>(4, 2, 0); }, {2, 4, 3, 3}));
  cases.push_back(LayerCase<AttentionPool<D>>(
      "attentive_stats_pool", [] { return AttentionPool<D>(3, 4, true); }, {2, 3, 6}));
  cases.push_back(LayerCase<AttentionPool<D>>(
      "self_attentive_pool", [] { return AttentionPool<D>(3, 4, false); }, {2, 3, 6}));
  cases.push_back(BatchNormCase());
  cases.push_back(ActivationCase("relu", Activation::kRelu));
  cases.push_back(ActivationCase("sigmoid", Activation::kSigmoid));
  cases.push_back(ActivationCase("tanh", Activation::kTanh));
  cases.push_back(ActivationCase("softmax", Activation::kSoftmax));
  cases.push_back(L2NormalizeCase());
  cases.push_back(BceCase());
  cases.push_back(ArcFaceCase());
  cases.push_back(SupConCase());
  cases.push_back(MdtcCase());
  cases.push_back(SvCase("sv_network_asp", PoolingKind::kAsp));
  cases.push_back(SvCase("sv_network_sap", PoolingKind::kSap));
  return cases;
}

}  // namespace pvt::testing
