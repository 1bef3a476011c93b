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
#ifndef PVT_LAYERS_H_
#define PVT_LAYERS_H_

#include <cstdint>
#include <string>

#include "pvt/tensor.h"

// Layer kernels with exact analytic gradients. Free functions are the pure
// kernels; the classes below bundle parameters with the forward cache needed
// by Backward(). Layouts:
//   1-D sequences  [B, C, T]
//   2-D maps       [B, C, H, W]   (H = frequency, W = time)
//   vectors        [N, D]
// Backward functions accumulate (+=) into parameter gradients and overwrite
// input gradients.
namespace pvt {

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------- kernels --

// y[b,c,t] = sum_k w[c,k] * x[b,c, t + k*d - left_pad], zero padded.
// Causal: left_pad = (K-1)*d. Otherwise K must be odd and the padding is
// split evenly.
template <typename T>
Tensor<T> DepthwiseConv1dForward(const Tensor<T>& x, const Tensor<T>& w,
                                 int dilation, bool causal);
template <typename T>
void DepthwiseConv1dBackward(const Tensor<T>& x, const Tensor<T>& w,
                             int dilation, bool causal, const Tensor<T>& dy,
                             Tensor<T>* dx, Tensor<T>* dw);

// y[b,:,t] = w * x[b,:,t] (+ bias). bias may be empty.
template <typename T>
Tensor<T> PointwiseConv1dForward(const Tensor<T>& x, const Tensor<T>& w,
                                 const Tensor<T>& bias);
template <typename T>
void PointwiseConv1dBackward(const Tensor<T>& x, const Tensor<T>& w,
                             const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw,
                             Tensor<T>* dbias);

// Cross-correlation, square kernel, zero padding.
template <typename T>
Tensor<T> Conv2dForward(const Tensor<T>& x, const Tensor<T>& w, int stride,
                        int pad);
template <typename T>
void Conv2dBackward(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                    const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw);

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> scale;  // 1/sqrt(var + eps) per channel
  Mode mode = Mode::kEval;
};

// Statistics over every axis except axis 1 (channels). Train mode uses batch
// statistics (biased variance) and updates the running estimates with the
// unbiased variance; eval mode uses the running estimates only.
template <typename T>
Tensor<T> BatchNormForward(const Tensor<T>& x, const Tensor<T>& gamma,
                           const Tensor<T>& beta, Tensor<T>* running_mean,
                           Tensor<T>* running_var, Mode mode, double momentum,
                           double eps, BatchNormCache<T>* cache);
template <typename T>
void BatchNormBackward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                       const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                       Tensor<T>* dbeta);

template <typename T>
Tensor<T> Relu(const Tensor<T>& x);
template <typename T>
Tensor<T> ReluBackward(const Tensor<T>& x, const Tensor<T>& dy);
template <typename T>
Tensor<T> Sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> SigmoidBackward(const Tensor<T>& y, const Tensor<T>& dy);
template <typename T>
Tensor<T> Tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> TanhBackward(const Tensor<T>& y, const Tensor<T>& dy);
template <typename T>
Tensor<T> Softmax(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> SoftmaxBackward(const Tensor<T>& y, const Tensor<T>& dy,
                          std::size_t axis);

enum class Activation { kRelu, kSigmoid, kTanh, kSoftmax };
// Softmax reduces over the last axis.
template <typename T>
Tensor<T> Activate(const Tensor<T>& x, Activation kind);

// x [N, Din], w [Dout, Din], b [Dout] (may be empty) -> [N, Dout].
template <typename T>
Tensor<T> DenseForward(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& b);
template <typename T>
void DenseBackward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                   Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db);

// Squeeze-excitation gate over a causal moving average of the last window
// frames (zero padded before t = 0):
//   p_t = (1/window) sum_{s=t-window+1..t} x_s
//   g_t = sigmoid(w2 relu(w1 p_t + b1) + b2),  y_t = x_t * g_t
template <typename T>
struct SeCache {
  Tensor<T> pooled;      // [B, C, T]
  Tensor<T> hidden_pre;  // [B, H, T]
  Tensor<T> gate;        // [B, C, T]
};
template <typename T>
Tensor<T> SeGate1dForward(const Tensor<T>& x, const Tensor<T>& w1,
                          const Tensor<T>& b1, const Tensor<T>& w2,
                          const Tensor<T>& b2, int window, SeCache<T>* cache);
template <typename T>
void SeGate1dBackward(const Tensor<T>& x, const Tensor<T>& w1,
                      const Tensor<T>& w2, int window, const SeCache<T>& cache,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw1,
                      Tensor<T>* db1, Tensor<T>* dw2, Tensor<T>* db2);

// Same gate with global average pooling over every non-channel axis of
// x [B, C, ...]; cache tensors are [B, C] / [B, H].
template <typename T>
Tensor<T> SeGlobalForward(const Tensor<T>& x, const Tensor<T>& w1,
                          const Tensor<T>& b1, const Tensor<T>& w2,
                          const Tensor<T>& b2, SeCache<T>* cache);
template <typename T>
void SeGlobalBackward(const Tensor<T>& x, const Tensor<T>& w1,
                      const Tensor<T>& w2, const SeCache<T>& cache,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw1,
                      Tensor<T>* db1, Tensor<T>* dw2, Tensor<T>* db2);

// Row-wise v / max(||v||, eps) for x [N, D].
template <typename T>
Tensor<T> L2NormalizeForward(const Tensor<T>& x, double eps);
template <typename T>
Tensor<T> L2NormalizeBackward(const Tensor<T>& x, const Tensor<T>& y,
                              const Tensor<T>& dy, double eps);

// Attentive pooling over time for h [B, D, T]:
//   e_t = v . tanh(W h_t + b),  alpha = softmax_t(e)
//   mu = sum_t alpha_t h_t,  sigma = sqrt(max(sum_t alpha_t h_t^2 - mu^2, eps))
// with_std selects ASP (output [B, 2D] = mu ++ sigma) or SAP ([B, D] = mu).
template <typename T>
struct AttentionPoolCache {
  Tensor<T> u;      // tanh activations [B, A, T]
  Tensor<T> alpha;  // [B, T]
  Tensor<T> mu;     // [B, D]
  Tensor<T> var;    // [B, D] raw variance before the eps clamp
};
template <typename T>
Tensor<T> AttentionPoolForward(const Tensor<T>& h, const Tensor<T>& w,
                               const Tensor<T>& b, const Tensor<T>& v,
                               bool with_std, double eps,
                               AttentionPoolCache<T>* cache);
template <typename T>
void AttentionPoolBackward(const Tensor<T>& h, const Tensor<T>& w,
                           const Tensor<T>& v, bool with_std, double eps,
                           const AttentionPoolCache<T>& cache,
                           const Tensor<T>& dy, Tensor<T>* dh, Tensor<T>* dw,
                           Tensor<T>* db, Tensor<T>* dv);

// ----------------------------------------------------------------- layers --

template <typename T>
class DepthwiseConv1d {
 public:
  DepthwiseConv1d() = default;
  DepthwiseConv1d(int channels, int kernel, int dilation, bool causal);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  int kernel() const { return kernel_; }
  int dilation() const { return dilation_; }
  bool causal() const { return causal_; }
  // Number of past frames the layer needs (K-1)*d.
  int context() const { return (kernel_ - 1) * dilation_; }

  Param<T> weight;  // [C, K]

 private:
  int kernel_ = 0;
  int dilation_ = 1;
  bool causal_ = true;
  Tensor<T> x_;
};

template <typename T>
class PointwiseConv1d {
 public:
  PointwiseConv1d() = default;
  PointwiseConv1d(int in_channels, int out_channels, bool bias);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  bool has_bias() const { return has_bias_; }

  Param<T> weight;  // [Cout, Cin]
  Param<T> bias;    // [Cout] when has_bias

 private:
  bool has_bias_ = false;
  Tensor<T> x_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  int stride() const { return stride_; }

  Param<T> weight;  // [Cout, Cin, k, k]

 private:
  int stride_ = 1;
  int pad_ = 0;
  Tensor<T> x_;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5);

  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x, Mode mode);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;  // eval mode, no cache

  // Per-channel affine map used in eval mode: y = a*x + c.
  void EvalAffine(std::vector<T>* a, std::vector<T>* c) const;

  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

  Param<T> gamma;
  Param<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  BatchNormCache<T> cache_;
};

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(int in_dim, int out_dim, bool bias = true);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  Param<T> weight;  // [Dout, Din]
  Param<T> bias;    // [Dout]

 private:
  bool has_bias_ = true;
  Tensor<T> x_;
};

// SE gate. window > 0 selects the causal moving-average squeeze over
// [B, C, T]; window == 0 selects global pooling over all non-channel axes.
template <typename T>
class SeGate {
 public:
  SeGate() = default;
  SeGate(int channels, int reduction, int window);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& x);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& x) const;

  int window() const { return window_; }
  int hidden() const { return static_cast<int>(w1.value.dim(0)); }

  Param<T> w1;  // [C/r, C]
  Param<T> b1;  // [C/r]
  Param<T> w2;  // [C, C/r]
  Param<T> b2;  // [C]

 private:
  int window_ = 0;
  Tensor<T> x_;
  SeCache<T> cache_;
};

// ASP (with_std) or SAP attention pooling with attention_dim hidden units.
template <typename T>
class AttentionPool {
 public:
  AttentionPool() = default;
  AttentionPool(int in_dim, int attention_dim, bool with_std,
                double eps = 1e-9);

  void Init(Rng* rng);
  void Register(ParamStore<T>* store, const std::string& prefix);
  Tensor<T> Forward(const Tensor<T>& h);
  Tensor<T> Backward(const Tensor<T>& dy);
  Tensor<T> Infer(const Tensor<T>& h) const;

  int output_dim() const;
  bool with_std() const { return with_std_; }

  Param<T> w;  // [A, D]
  Param<T> b;  // [A]
  Param<T> v;  // [A]

 private:
  bool with_std_ = true;
  double eps_ = 1e-9;
  Tensor<T> h_;
  AttentionPoolCache<T> cache_;
};

// He-uniform fill: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T>
void HeUniform(Tensor<T>* t, int64_t fan_in, Rng* rng);

}  // namespace pvt

#endif  // PVT_LAYERS_H_
