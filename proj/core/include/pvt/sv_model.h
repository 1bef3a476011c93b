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

#ifndef PVT_SV_MODEL_H_
#define PVT_SV_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pvt/features.h"
#include "pvt/layers.h"

namespace pvt {

struct SvStageSpec {
  int channels = 0;
  int blocks = 0;
  int stride = 1;  // applied by the first block of the stage
};

enum class PoolingKind { kAsp, kSap };

PoolingKind ParsePoolingKind(const std::string& name);
std::string PoolingKindName(PoolingKind kind);

// Residual SE extractor on the F x T fbank map, attentive pooling over time
// and a dense embedding layer. Class weights for the angular-margin loss
// belong to the model so that checkpoints can resume training.
struct SvConfig {
  int input_dim = 80;
  int stem_channels = 32;
  std::vector<SvStageSpec> stages = {{32, 3, 1}, {64, 4, 2}, {128, 6, 2}, {256, 3, 2}};
  int se_reduction = 8;
  PoolingKind pooling = PoolingKind::kAsp;
  int attention_dim = 128;
  int embedding_dim = 128;
  double bn_momentum = 0.1;

  double arcface_scale = 32.0;
  double arcface_margin = 0.2;
  double supcon_temperature = 0.07;
  double supcon_weight = 1.0;

  // "resnet34se" (3/4/6/3 blocks) or "tiny" (two single-block stages).
  static SvConfig Preset(const std::string& name);

  int num_blocks() const;
  // Frequency bins left after the strided stages.
  int output_freq() const;
  // Channel dimension seen by the pooling layer (channels x frequency).
  int pooled_input_dim() const;
  void Validate() const;
  std::string Fingerprint() const;
};

// conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN -> SE -> (+ shortcut) -> ReLU.
// The shortcut is a strided 1x1 conv + BN whenever the shape changes.
template <typename T>
class ResBlock2d {
 public:
  ResBlock2d() = default;
  ResBlock2d(int in_channels, int out_channels, int stride, int se_reduction,
             double bn_momentum);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x, Mode mode);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  bool has_projection() const { return projection_; }

  Conv2d<T> conv1;
  BatchNorm<T> bn1;
  Conv2d<T> conv2;
  BatchNorm<T> bn2;
  SeGate<T> se;
  Conv2d<T> short_conv;
  BatchNorm<T> short_bn;

 private:
  bool projection_ = false;
  Tensor<T> pre1_, pre_out_;
};

template <typename T>
class SvModel {
 public:
  SvModel() = default;
  // n_classes = 0 builds an inference-only model without class weights.
  static SvModel Build(const SvConfig& cfg, int n_classes, uint64_t seed);

  const SvConfig& config() const { return cfg_; }
  int num_classes() const { return n_classes_; }
  // Replaces the class weights with n_classes freshly initialized rows.
  void ResetClassifier(int n_classes, uint64_t seed);

  // feats [B, F, T] -> raw (unnormalized) embeddings [B, E].
  Tensor<T> Forward(const Tensor<T>& feats, Mode mode);
  // d loss / d embeddings -> accumulates parameter gradients; returns
  // d loss / d feats.
  Tensor<T> Backward(const Tensor<T>& d_emb);
  Tensor<T> Infer(const Tensor<T>& feats) const;

  ParamStore<T> Params();
  int64_t NumParams() const;

  // Names of the parameters trained during the frozen finetune phase.
  static bool IsClassifierParam(const std::string& name);
  static bool IsEmbeddingParam(const std::string& name);

  template <typename U>
  SvModel<U> Cast() const;

  Param<T> class_weights;  // [n_classes, E]; rows normalized at use

 private:
  template <typename U>
  friend class SvModel;

  SvConfig cfg_;
  int n_classes_ = 0;
  Conv2d<T> stem_conv_;
  BatchNorm<T> stem_bn_;
  std::vector<ResBlock2d<T>> blocks_;
  std::vector<std::string> block_names_;
  AttentionPool<T> pool_;
  Dense<T> embedding_;

  Tensor<T> stem_pre_;
  Shape map_shape_;  // [B, C, F', T'] of the last block output
};

// T x D feature matrix -> [1, D, T] (the F x T map with a batch axis).
template <typename T>
Tensor<T> FeaturesToMap(const FeatureMatrix& feat);

struct Embedding {
  std::vector<float> vector;
  bool normalized = false;
};

// Extractor -> pooling -> dense -> L2 normalization, eval mode.
Embedding EmbedUtterance(const SvModel<float>& model, const FeatureMatrix& feat);

struct EnrollmentProfile {
  std::string speaker_id;
  std::vector<float> vector;  // unit norm
};

// Mean of the normalized embeddings, renormalized. Throws when the mean is
// (numerically) zero.
EnrollmentProfile Enroll(const std::string& speaker_id, const std::vector<Embedding>& embeddings);

// Inner product of the L2-normalized arguments.
double CosineScore(const std::vector<float>& a, const std::vector<float>& b);
double CosineScore(const EnrollmentProfile& profile, const Embedding& test);

// Equal-weight mean of two cosine scores.
double FuseScores(double a, double b);

extern template class SvModel<float>;
extern template class SvModel<double>;

}  // namespace pvt

#endif  // PVT_SV_MODEL_H_
