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

#include "pvt/kws_train.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spdlog/spdlog.h"

namespace pvt {

void KwsTrainConfig::Validate() const {
  PVT_CHECK(lr > 0.0, "kws_train: lr must be > 0");
  PVT_CHECK(batch_size >= 1, "kws_train: batch_size must be >= 1");
  PVT_CHECK(decay_factor > 0.0 && decay_factor < 1.0, "kws_train: decay_factor must be in (0, 1)");
  PVT_CHECK(min_epochs >= 1, "kws_train: min_epochs must be >= 1");
  PVT_CHECK(max_epochs >= 1, "kws_train: max_epochs must be >= 1");
  PVT_CHECK(loss_clamp > 0.0 && loss_clamp < 0.5, "kws_train: loss_clamp must be in (0, 0.5)");
  PVT_CHECK(val_fraction >= 0.0 && val_fraction < 1.0, "kws_train: val_fraction must be in [0, 1)");
  PVT_CHECK(variant1 >= 0 && variant2 >= 0 && variant3 >= 0 && negative_cuts >= 0,
            "kws_train: variant counts must be >= 0");
  augment.Validate();
}

double BceFrame(double y, double target, double eps) {
  const double yc = std::clamp(y, eps, 1.0 - eps);
  return -target * std::log(yc) - (1.0 - target) * std::log(1.0 - yc);
}

double BceFrameGrad(double y, double target, double eps) {
  const double yc = std::clamp(y, eps, 1.0 - eps);
  return -target / yc + (1.0 - target) / (1.0 - yc);
}

template <typename T>
BceResult<T> BceLoss(const Tensor<T>& y, const Tensor<float>& targets,
                     const Tensor<float>& weights, double eps) {
  if (y.shape() != targets.shape() || y.shape() != weights.shape()) {
    throw ValidationError("bce: shape mismatch " + ShapeString(y.shape()) + " / " +
                          ShapeString(targets.shape()) + " / " + ShapeString(weights.shape()));
  }
  BceResult<T> r;
  r.grad = Tensor<T>(y.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = weights[i];
    if (w <= 0.0) continue;
    total += w * BceFrame(y[i], targets[i], eps);
    r.weight_sum += w;
  }
  if (r.weight_sum == 0.0) return r;
  r.loss = total / r.weight_sum;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = weights[i];
    if (w <= 0.0) continue;
    r.grad[i] = static_cast<T>(w * BceFrameGrad(y[i], targets[i], eps) / r.weight_sum);
  }
  return r;
}

template BceResult<float> BceLoss(const Tensor<float>&, const Tensor<float>&,
                                  const Tensor<float>&, double);
template BceResult<double> BceLoss(const Tensor<double>&, const Tensor<float>&,
                                   const Tensor<float>&, double);

namespace {

// Last entry is not below the minimum of the earlier ones.
bool NoImprovement(const std::vector<double>& history) {
  if (history.size() < 2) return false;
  const double best = *std::min_element(history.begin(), history.end() - 1);
  return history.back() >= best;
}

}  // namespace

double PlateauLr(const std::vector<double>& val_history, double lr, double decay) {
  return NoImprovement(val_history) ? lr * decay : lr;
}

bool EarlyStop(const std::vector<double>& val_history, int epoch, int min_epochs) {
  return epoch >= min_epochs && NoImprovement(val_history);
}

std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> SplitTrainVal(
    const std::vector<ManifestEntry>& entries, double fraction, uint64_t seed) {
  PVT_CHECK(fraction > 0.0 && fraction < 1.0, "split: fraction must be in (0, 1)");
  std::set<std::string> unique;
  for (const auto& e : entries) unique.insert(e.speaker_id);
  if (unique.size() < 2) {
    throw ValidationError("split: need at least two distinct speakers, got " +
                          std::to_string(unique.size()));
  }
  std::vector<std::string> speakers(unique.begin(), unique.end());
  Rng rng(seed);
  std::shuffle(speakers.begin(), speakers.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::nearbyint(fraction * static_cast<double>(speakers.size()))));
  const std::set<std::string> val_speakers(speakers.begin(), speakers.begin() + n_val);
  std::pair<std::vector<ManifestEntry>, std::vector<ManifestEntry>> out;
  for (const auto& e : entries) {
    (val_speakers.count(e.speaker_id) ? out.second : out.first).push_back(e);
  }
  return out;
}

std::vector<LabeledExample> BuildKwsExamples(const std::vector<ManifestEntry>& entries,
                                             const FbankConfig& fbank,
                                             const KwsTrainConfig& cfg, Rng* rng) {
  std::vector<AudioBuffer> audio;
  audio.reserve(entries.size());
  std::vector<AudioBuffer> fillers;
  for (const auto& e : entries) {
    audio.push_back(ReadWav(e.wav_path));
    if (!e.positive()) fillers.push_back(audio.back());
  }
  const int min_samples = fbank.win_samples(kSampleRate);
  std::vector<LabeledExample> out;
  auto add = [&](const std::string& id, const AudioBuffer& a, bool positive, int64_t kw_start,
                 int64_t kw_end) {
    if (static_cast<int>(a.samples.size()) < min_samples) return;
    LabeledExample ex;
    ex.utt_id = id;
    ex.features = ComputeFeatures(a, fbank);
    LabelFrames(ex.features.num_frames(), positive, kw_start, kw_end, &ex.targets, &ex.weights);
    out.push_back(std::move(ex));
  };
  auto add_composed = [&](const std::string& id, const ComposedUtterance& c) {
    add(id, c.audio, true, SecondsToFrame(c.keyword_start_s()), SecondsToFrame(c.keyword_end_s()));
  };
  const bool need_fillers = cfg.variant2 > 0 || cfg.variant3 > 0 || cfg.negative_cuts > 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.positive()) {
      add(e.utt_id, audio[i], false, 0, 0);
      continue;
    }
    add(e.utt_id, audio[i], true, SecondsToFrame(e.keyword_start_s),
        SecondsToFrame(e.keyword_end_s));
    const AudioBuffer keyword = ExtractKeyword(e, audio[i]);
    for (int k = 0; k < cfg.variant1; ++k) {
      add_composed(e.utt_id + "#v1." + std::to_string(k), ComposeUtterance(keyword, 1, nullptr, nullptr));
    }
    if (need_fillers && fillers.empty()) {
      throw ValidationError("kws data: variants 2/3 and negative cuts need negative utterances as fillers");
    }
    for (int k = 0; k < cfg.variant2; ++k) {
      const AudioBuffer pre = DrawFiller(fillers, rng);
      add_composed(e.utt_id + "#v2." + std::to_string(k), ComposeUtterance(keyword, 2, &pre, nullptr));
    }
    for (int k = 0; k < cfg.variant3; ++k) {
      const AudioBuffer pre = DrawFiller(fillers, rng);
      const AudioBuffer post = DrawFiller(fillers, rng);
      add_composed(e.utt_id + "#v3." + std::to_string(k), ComposeUtterance(keyword, 3, &pre, &post));
    }
    for (int k = 0; k < cfg.negative_cuts; ++k) {
      const AudioBuffer pre = DrawFiller(fillers, rng);
      const AudioBuffer post = DrawFiller(fillers, rng);
      const auto cuts = BuildNegativeCuts(ComposeUtterance(keyword, 3, &pre, &post));
      add(e.utt_id + "#cutA." + std::to_string(k), cuts.first, false, 0, 0);
      add(e.utt_id + "#cutB." + std::to_string(k), cuts.second, false, 0, 0);
    }
  }
  return out;
}

std::string TrainReport::ToJsonl() const {
  std::ostringstream os;
  for (const auto& r : epochs) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["lr"] = r.lr;
    j["best_epoch"] = r.best_epoch;
    j["stopped"] = r.epoch == stopped_epoch;
    os << j.dump() << '\n';
  }
  return os.str();
}

namespace {

// Masks each example over its own (unpadded) length.
void MaskBatch(const std::vector<LabeledExample>& examples, const AugmentConfig& aug,
               KwsBatch* batch, Rng* rng) {
  const int64_t dim = batch->feats.dim(1), max_t = batch->feats.dim(2);
  for (std::size_t k = 0; k < batch->indices.size(); ++k) {
    const std::size_t len = examples[batch->indices[k]].features.num_frames();
    float* f = batch->feats.data() + static_cast<int64_t>(k) * dim * max_t;
    for (const SpecMask& m : SampleSpecMasks(len, static_cast<std::size_t>(dim), aug, rng)) {
      for (int64_t i = m.start; i < m.start + m.length; ++i) {
        if (m.time) {
          for (int64_t d = 0; d < dim; ++d) f[d * max_t + i] = 0.0f;
        } else {
          std::fill_n(f + i * max_t, len, 0.0f);
        }
      }
    }
  }
}

}  // namespace

double TrainEpoch(MdtcModel<float>* model, const std::vector<LabeledExample>& examples,
                  OptimizerState<float>* opt, const KwsTrainConfig& cfg, Rng* rng) {
  ParamStore<float> params = model->Params();
  BatchIterator it(examples, static_cast<std::size_t>(cfg.batch_size), rng);
  KwsBatch batch;
  double total = 0.0, weight = 0.0;
  std::size_t index = 0;
  while (it.Next(&batch)) {
    ++index;
    if (cfg.spec_augment) MaskBatch(examples, cfg.augment, &batch, rng);
    const Tensor<float> y = model->Forward(batch.feats, Mode::kTrain);
    const BceResult<float> bce = BceLoss(y, batch.targets, batch.weights, cfg.loss_clamp);
    if (bce.weight_sum == 0.0) continue;
    if (!std::isfinite(bce.loss)) {
      throw RuntimeError("kws_train: non-finite loss in batch " + std::to_string(index) +
                         " (first utterance " + examples[batch.indices[0]].utt_id + ")");
    }
    params.ZeroGrad();
    model->Backward(bce.grad);
    if (cfg.grad_clip > 0.0) ClipGradNorm(params, cfg.grad_clip);
    OptimizerStep(params, opt);
    total += bce.loss * bce.weight_sum;
    weight += bce.weight_sum;
  }
  return weight > 0.0 ? total / weight : 0.0;
}

double EvaluateLoss(const MdtcModel<float>& model, const std::vector<LabeledExample>& examples,
                    const KwsTrainConfig& cfg) {
  double total = 0.0, weight = 0.0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t begin = 0; begin < examples.size(); begin += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(examples.size(), begin + bs); ++i) idx.push_back(i);
    const KwsBatch batch = MakeBatch(examples, idx);
    const BceResult<float> bce =
        BceLoss(model.Infer(batch.feats), batch.targets, batch.weights, cfg.loss_clamp);
    total += bce.loss * bce.weight_sum;
    weight += bce.weight_sum;
  }
  return weight > 0.0 ? total / weight : 0.0;
}

TrainReport TrainKws(MdtcModel<float>* model, const std::vector<LabeledExample>& train,
                     const std::vector<LabeledExample>& val, const KwsTrainConfig& cfg,
                     const EpochCallback& on_epoch) {
  cfg.Validate();
  PVT_CHECK(!train.empty(), "kws_train: empty training set");
  Rng rng(cfg.seed);
  OptimizerState<float> opt = MakeAdam<float>(cfg.lr);
  TrainReport report;
  std::vector<double> history;
  MdtcModel<float> best = *model;
  double best_loss = 0.0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr;
    rec.train_loss = TrainEpoch(model, train, &opt, cfg, &rng);
    rec.val_loss = val.empty() ? rec.train_loss : EvaluateLoss(*model, val, cfg);
    if (!std::isfinite(rec.val_loss)) {
      throw RuntimeError("kws_train: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.push_back(rec.val_loss);
    if (report.best_epoch == 0 || rec.val_loss < best_loss) {
      best_loss = rec.val_loss;
      report.best_epoch = epoch;
      best = *model;
    }
    rec.best_epoch = report.best_epoch;
    report.epochs.push_back(rec);
    report.stopped_epoch = epoch;
    spdlog::debug("kws epoch {} train {:.5f} val {:.5f} lr {:.6g}", epoch, rec.train_loss,
                  rec.val_loss, rec.lr);
    if (on_epoch) on_epoch(rec);
    if (cfg.early_stopping && EarlyStop(history, epoch, cfg.min_epochs)) break;
    opt.lr = PlateauLr(history, opt.lr, cfg.decay_factor);
  }
  *model = std::move(best);
  return report;
}

}  // namespace pvt
