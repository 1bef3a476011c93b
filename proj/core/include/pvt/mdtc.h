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

#ifndef PVT_MDTC_H_
#define PVT_MDTC_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvt/features.h"
#include "pvt/layers.h"

namespace pvt {

// Multi-scale dilated temporal convolution keyword detector.
//
//   input projection: pointwise D->C (+bias) -> BN -> ReLU
//   S stacks, each a chain of DTC blocks with the configured dilations:
//     depthwise(K, d) -> BN -> ReLU -> point -> BN -> ReLU -> point -> BN
//     -> SE -> (+ block input) -> ReLU
//   classifier: per-frame dense C->1 on the elementwise sum of all stack
//   outputs, followed by a sigmoid.
struct MdtcConfig {
  int input_dim = 80;
  int channels = 64;
  int stacks = 4;
  std::vector<int> dilations = {1, 2, 4, 8};  // one DTC block per entry
  int kernel = 5;
  int se_reduction = 8;
  // SE squeeze window in frames. 1 gates each frame from its own
  // activations, which keeps the receptive field at the convolutional one.
  int se_window = 1;
  bool causal = true;
  double bn_momentum = 0.1;

  int blocks_per_stack() const { return static_cast<int>(dilations.size()); }
  void Validate() const;
  std::string Fingerprint() const;
};

// Frames of input that can influence one output frame:
//   1 + S * sum_blocks ((K-1)*d + (se_window-1)).
// With se_window = 1 this is the convolutional receptive field
// 1 + S * sum (K-1)*d (241 for the default config, 61 per stack).
int64_t ReceptiveField(const MdtcConfig& cfg);

// Closed-form parameter count (BN gamma/beta included, running stats not).
int64_t AnalyticParamCount(const MdtcConfig& cfg);

struct PosteriorTrack {
  std::vector<float> posteriors;

  std::size_t size() const { return posteriors.size(); }
};

template <typename T>
class DtcBlock {
 public:
  DtcBlock() = default;
  DtcBlock(int channels, int kernel, int dilation, int se_reduction,
           int se_window, bool causal, double bn_momentum);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x, Mode mode);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  DepthwiseConv1d<T> depthwise;
  BatchNorm<T> bn1;
  PointwiseConv1d<T> point1;
  BatchNorm<T> bn2;
  PointwiseConv1d<T> point2;
  BatchNorm<T> bn3;
  SeGate<T> se;

 private:
  Tensor<T> pre1_, pre2_, pre_out_;
};

template <typename T>
class MdtcStreamState;

template <typename T>
class MdtcModel {
 public:
  MdtcModel() = default;
  static MdtcModel Build(const MdtcConfig& cfg, uint64_t seed);

  const MdtcConfig& config() const { return cfg_; }

  // feats [B, D, T] -> posteriors [B, T]. Caches activations for Backward.
  Tensor<T> Forward(const Tensor<T>& feats, Mode mode);
  // d loss / d posteriors [B, T] -> d loss / d feats; accumulates parameter
  // gradients.
  Tensor<T> Backward(const Tensor<T>& d_post);
  // Eval-mode forward without caches; safe to call concurrently.
  Tensor<T> Infer(const Tensor<T>& feats) const;

  // One posterior per frame of a T x D feature matrix.
  PosteriorTrack Posteriors(const FeatureMatrix& feat) const;

  ParamStore<T> Params();
  int64_t NumParams() const;

  MdtcStreamState<T> NewStream() const;
  // Consumes one D-dim frame and returns y_t, equal to Infer() at frame t.
  T StreamPush(MdtcStreamState<T>* state, std::span<const T> frame) const;

  // Same architecture with the parameters converted to U.
  template <typename U>
  MdtcModel<U> Cast() const;

 private:
  template <typename U>
  friend class MdtcModel;

  MdtcConfig cfg_;
  PointwiseConv1d<T> input_conv_;
  BatchNorm<T> input_bn_;
  std::vector<DtcBlock<T>> blocks_;  // stack-major
  PointwiseConv1d<T> classifier_;

  Tensor<T> input_pre_;
  Tensor<T> post_;
};

// Per-stream ring buffers: for every block the last (K-1)*d block inputs and
// the last se_window SE inputs. Zero-initialized, matching the zero left
// padding of the batch path.
template <typename T>
class MdtcStreamState {
 public:
  int64_t frames() const { return frames_; }

 private:
  friend class MdtcModel<T>;

  struct Ring {
    int64_t capacity = 0;  // frames
    int64_t channels = 0;
    int64_t head = 0;      // slot of the most recent frame
    std::vector<T> data;

    void Init(int64_t cap, int64_t ch);
    void Push(const T* frame);
    // lag 0 = most recent pushed frame
    const T* At(int64_t lag) const;
  };
  struct BlockState {
    Ring conv;  // previous block inputs
    Ring se;    // SE inputs including the current frame
  };

  std::string fingerprint_;
  int64_t frames_ = 0;
  std::vector<BlockState> blocks_;
};

// T x D feature matrix -> [1, D, T].
template <typename T>
Tensor<T> FeaturesToTensor(const FeatureMatrix& feat);

extern template class MdtcModel<float>;
extern template class MdtcModel<double>;

}  // namespace pvt

#endif  // PVT_MDTC_H_
