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

#include "pvt/sv_train.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pvt/optim.h"
#include "pvt/sv_loss.h"
#include "spdlog/spdlog.h"

namespace pvt {

FreezePolicy ParseFreezePolicy(const std::string& name) {
  if (name == "classifier") return FreezePolicy::kClassifier;
  if (name == "classifier+embedding") return FreezePolicy::kClassifierAndEmbedding;
  throw ValidationError("sv: freeze policy must be classifier or classifier+embedding, got " + name);
}

std::string FreezePolicyName(FreezePolicy policy) {
  return policy == FreezePolicy::kClassifier ? "classifier" : "classifier+embedding";
}

void SvTrainConfig::Validate() const {
  PVT_CHECK(lr > 0.0 && finetune_lr > 0.0, "sv_train: learning rates must be > 0");
  PVT_CHECK(lr_step_epochs >= 1, "sv_train: lr_step_epochs must be >= 1");
  PVT_CHECK(lr_decay > 0.0 && lr_decay <= 1.0, "sv_train: lr_decay must be in (0, 1]");
  PVT_CHECK(epochs >= 1 && finetune_epochs >= 1, "sv_train: epoch counts must be >= 1");
  PVT_CHECK(momentum >= 0.0 && momentum < 1.0, "sv_train: momentum must be in [0, 1)");
  PVT_CHECK(weight_decay >= 0.0, "sv_train: weight_decay must be >= 0");
  PVT_CHECK(batch_size >= 2, "sv_train: batch_size must be >= 2");
  PVT_CHECK(crop_frames >= 1, "sv_train: crop_frames must be >= 1");
}

double SvLearningRate(double base, int step_epochs, double decay, int epoch) {
  return base * std::pow(decay, std::floor(static_cast<double>(epoch) / step_epochs));
}

std::string SvTrainReport::ToJsonl() const {
  std::ostringstream os;
  for (const auto& r : epochs) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["phase"] = r.phase;
    j["lr"] = r.lr;
    j["loss"] = r.loss;
    j["arcface"] = r.arcface;
    j["supcon"] = r.supcon;
    j["accuracy"] = r.accuracy;
    os << j.dump() << '\n';
  }
  return os.str();
}

namespace {

int CountLabels(const std::vector<SvExample>& examples) {
  PVT_CHECK(!examples.empty(), "sv_train: empty training set");
  int max_label = -1;
  for (const auto& e : examples) {
    PVT_CHECK(e.label >= 0, "sv_train: negative label for " + e.utt_id);
    PVT_CHECK(e.features.num_frames() >= 1, "sv_train: " + e.utt_id + " has no frames");
    max_label = std::max(max_label, e.label);
  }
  return max_label + 1;
}

// Random crops of a common length, the shortest of crop_frames and the
// batch's utterance lengths.
Tensor<float> CropBatch(const std::vector<SvExample>& examples,
                        const std::vector<std::size_t>& idx, int crop_frames, Rng* rng,
                        std::vector<int>* labels) {
  std::size_t len = static_cast<std::size_t>(crop_frames);
  for (std::size_t i : idx) len = std::min(len, examples[i].features.num_frames());
  const auto dim = static_cast<int64_t>(examples[idx[0]].features.dim());
  const auto t = static_cast<int64_t>(len);
  Tensor<float> x({static_cast<int64_t>(idx.size()), dim, t});
  labels->clear();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& f = examples[idx[b]].features;
    const std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, f.num_frames() - len)(*rng);
    float* dst = x.data() + static_cast<int64_t>(b) * dim * t;
    for (int64_t k = 0; k < t; ++k) {
      const float* row = f.row(start + k);
      for (int64_t d = 0; d < dim; ++d) dst[d * t + k] = row[d];
    }
    labels->push_back(examples[idx[b]].label);
  }
  return x;
}

bool HasPositivePair(const std::vector<int>& labels) {
  std::set<int> seen;
  for (int y : labels) {
    if (!seen.insert(y).second) return true;
  }
  return false;
}

// One epoch; updates only the params in `trainable`.
SvEpochRecord RunEpoch(SvModel<float>* model, const std::vector<SvExample>& examples,
                       const SvTrainConfig& cfg, Mode mode, ParamStore<float>& all,
                       const ParamStore<float>& trainable, OptimizerState<float>* opt, Rng* rng) {
  const SvConfig& mc = model->config();
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), *rng);
  SvEpochRecord rec;
  rec.lr = opt->lr;
  int seen = 0, correct = 0, batches = 0;
  std::vector<int> labels;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    const std::vector<std::size_t> idx(order.begin() + begin,
                                       order.begin() + std::min(order.size(), begin + bs));
    const Tensor<float> x = CropBatch(examples, idx, cfg.crop_frames, rng, &labels);
    const Tensor<float> emb = model->Forward(x, mode);
    const ArcFaceResult<float> arc = ArcFaceLoss(emb, labels, model->class_weights.value,
                                                 mc.arcface_scale, mc.arcface_margin);
    Tensor<float> d_emb = arc.d_emb;
    double supcon = 0.0;
    if (mc.supcon_weight > 0.0 && idx.size() >= 2 && HasPositivePair(labels)) {
      const SupConResult<float> sc = SupConLoss(emb, labels, mc.supcon_temperature);
      supcon = sc.loss;
      for (std::size_t i = 0; i < d_emb.size(); ++i) {
        d_emb[i] += static_cast<float>(mc.supcon_weight) * sc.d_emb[i];
      }
    }
    const double loss = SvTotalLoss(arc.loss, supcon, mc.supcon_weight);
    if (!std::isfinite(loss)) {
      throw RuntimeError("sv_train: non-finite loss (first utterance " + examples[idx[0]].utt_id + ")");
    }
    all.ZeroGrad();
    model->Backward(d_emb);
    for (std::size_t i = 0; i < arc.d_weights.size(); ++i) {
      model->class_weights.grad[i] += arc.d_weights[i];
    }
    if (cfg.grad_clip > 0.0) ClipGradNorm(trainable, cfg.grad_clip);
    OptimizerStep(trainable, opt);
    rec.loss += loss;
    rec.arcface += arc.loss;
    rec.supcon += supcon;
    correct += arc.correct;
    seen += static_cast<int>(idx.size());
    ++batches;
  }
  rec.loss /= batches;
  rec.arcface /= batches;
  rec.supcon /= batches;
  rec.accuracy = static_cast<double>(correct) / seen;
  return rec;
}

}  // namespace

SvTrainReport TrainSv(SvModel<float>* model, const std::vector<SvExample>& examples,
                      const SvTrainConfig& cfg, const SvEpochCallback& on_epoch) {
  cfg.Validate();
  const int n_classes = CountLabels(examples);
  if (model->num_classes() != n_classes) model->ResetClassifier(n_classes, cfg.seed);
  Rng rng(cfg.seed);
  ParamStore<float> params = model->Params();
  OptimizerState<float> opt = MakeSgd<float>(cfg.lr, cfg.momentum, cfg.weight_decay);
  SvTrainReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = SvLearningRate(cfg.lr, cfg.lr_step_epochs, cfg.lr_decay, epoch);
    SvEpochRecord rec = RunEpoch(model, examples, cfg, Mode::kTrain, params, params, &opt, &rng);
    rec.epoch = epoch;
    rec.phase = 0;
    spdlog::debug("sv epoch {} loss {:.4f} acc {:.3f} lr {:.4g}", epoch, rec.loss, rec.accuracy, rec.lr);
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return report;
}

SvTrainReport FinetuneSv(SvModel<float>* model, const std::vector<SvExample>& examples,
                         const SvTrainConfig& cfg, const SvEpochCallback& on_epoch) {
  cfg.Validate();
  const int n_classes = CountLabels(examples);
  if (model->num_classes() != n_classes) model->ResetClassifier(n_classes, cfg.seed);
  Rng rng(cfg.seed);
  ParamStore<float> all = model->Params();
  const FreezePolicy policy = cfg.freeze;
  const ParamStore<float> head = all.Filter([policy](const std::string& name) {
    return SvModel<float>::IsClassifierParam(name) ||
           (policy == FreezePolicy::kClassifierAndEmbedding && SvModel<float>::IsEmbeddingParam(name));
  });
  OptimizerState<float> opt = MakeSgd<float>(cfg.finetune_lr, cfg.momentum, cfg.weight_decay);
  SvTrainReport report;
  int phase = 1;
  for (int epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    SvEpochRecord rec = phase == 1
                            ? RunEpoch(model, examples, cfg, Mode::kEval, all, head, &opt, &rng)
                            : RunEpoch(model, examples, cfg, Mode::kTrain, all, all, &opt, &rng);
    rec.epoch = epoch;
    rec.phase = phase;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (phase == 1 && rec.loss <= cfg.finetune_switch_loss) {
      phase = 2;
      report.switch_epoch = epoch + 1;
      opt = MakeSgd<float>(cfg.finetune_lr, cfg.momentum, cfg.weight_decay);
    }
  }
  return report;
}

}  // namespace pvt
