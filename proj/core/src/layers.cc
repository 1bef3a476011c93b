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

#include "pvt/layers.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pvt/grad_check.h"

namespace pvt {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

void RequireRank(const char* op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ValidationError(std::string(op) + ": expected rank " +
                          std::to_string(want) + ", got " + std::to_string(got));
  }
}

void RequireDim(const char* op, int64_t got, int64_t want, const char* what) {
  if (got != want) {
    throw ValidationError(std::string(op) + ": shape mismatch on " + what +
                          " (" + std::to_string(got) + " vs " +
                          std::to_string(want) + ")");
  }
}

template <typename T>
void EnsureShape(Tensor<T>* t, const Shape& shape) {
  if (t->shape() != shape) *t = Tensor<T>(shape);
}

int LeftPad(int kernel, int dilation, bool causal) {
  return causal ? (kernel - 1) * dilation : (kernel - 1) * dilation / 2;
}

// Channel-wise layout helper for [B, C, ...].
struct ChannelView {
  int64_t batch, channels, inner;
};

template <typename T>
ChannelView ViewChannels(const Tensor<T>& x) {
  if (x.rank() < 2) throw ValidationError("expected tensor with rank >= 2");
  int64_t inner = 1;
  for (std::size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
  return {x.dim(0), x.dim(1), inner};
}

}  // namespace

namespace detail {
thread_local uint64_t* relu_pattern_hash = nullptr;
}  // namespace detail

// --------------------------------------------------------- depthwise conv --

template <typename T>
Tensor<T> DepthwiseConv1dForward(const Tensor<T>& x, const Tensor<T>& w,
                                 int dilation, bool causal) {
  RequireRank("conv1d_depthwise", x.rank(), 3);
  RequireRank("conv1d_depthwise", w.rank(), 2);
  RequireDim("conv1d_depthwise", w.dim(0), x.dim(1), "channels");
  const int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  const int kernel = static_cast<int>(w.dim(1));
  PVT_CHECK(kernel >= 1 && dilation >= 1, "conv1d_depthwise: need K >= 1, d >= 1");
  PVT_CHECK(causal || kernel % 2 == 1, "conv1d_depthwise: centered mode needs odd K");
  const int left = LeftPad(kernel, dilation, causal);
  Tensor<T> y(x.shape());
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t c = 0; c < channels; ++c) {
      const T* xr = x.data() + (b * channels + c) * len;
      T* yr = y.data() + (b * channels + c) * len;
      const T* wr = w.data() + c * kernel;
      for (int k = 0; k < kernel; ++k) {
        const int64_t off = static_cast<int64_t>(k) * dilation - left;
        const int64_t t0 = std::max<int64_t>(0, -off);
        const int64_t t1 = std::min<int64_t>(len, len - off);
        const T wk = wr[k];
        for (int64_t t = t0; t < t1; ++t) yr[t] += wk * xr[t + off];
      }
    }
  }
  return y;
}

template <typename T>
void DepthwiseConv1dBackward(const Tensor<T>& x, const Tensor<T>& w,
                             int dilation, bool causal, const Tensor<T>& dy,
                             Tensor<T>* dx, Tensor<T>* dw) {
  RequireDim("conv1d_depthwise", static_cast<int64_t>(dy.size()),
             static_cast<int64_t>(x.size()), "upstream gradient");
  const int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  const int kernel = static_cast<int>(w.dim(1));
  const int left = LeftPad(kernel, dilation, causal);
  if (dx) *dx = Tensor<T>(x.shape());
  if (dw) EnsureShape(dw, w.shape());
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t c = 0; c < channels; ++c) {
      const T* xr = x.data() + (b * channels + c) * len;
      const T* gr = dy.data() + (b * channels + c) * len;
      const T* wr = w.data() + c * kernel;
      T* dxr = dx ? dx->data() + (b * channels + c) * len : nullptr;
      for (int k = 0; k < kernel; ++k) {
        const int64_t off = static_cast<int64_t>(k) * dilation - left;
        const int64_t t0 = std::max<int64_t>(0, -off);
        const int64_t t1 = std::min<int64_t>(len, len - off);
        T acc = 0;
        for (int64_t t = t0; t < t1; ++t) {
          acc += gr[t] * xr[t + off];
          if (dxr) dxr[t + off] += wr[k] * gr[t];
        }
        if (dw) (*dw)[c * kernel + k] += acc;
      }
    }
  }
}

// --------------------------------------------------------- pointwise conv --

template <typename T>
Tensor<T> PointwiseConv1dForward(const Tensor<T>& x, const Tensor<T>& w,
                                 const Tensor<T>& bias) {
  RequireRank("conv1d_pointwise", x.rank(), 3);
  RequireRank("conv1d_pointwise", w.rank(), 2);
  RequireDim("conv1d_pointwise", w.dim(1), x.dim(1), "input channels");
  const int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const int64_t cout = w.dim(0);
  if (!bias.empty()) RequireDim("conv1d_pointwise", bias.dim(0), cout, "bias");
  // Every output frame accumulates over input channels in ascending order, so
  // a frame's value does not depend on the sequence length. Streaming
  // inference calls this with length 1 and stays bit-identical to batch.
  Tensor<T> y({batch, cout, len});
  for (int64_t b = 0; b < batch; ++b) {
    const T* xb = x.data() + b * cin * len;
    for (int64_t o = 0; o < cout; ++o) {
      T* yr = y.data() + (b * cout + o) * len;
      const T* wr = w.data() + o * cin;
      for (int64_t i = 0; i < cin; ++i) {
        const T wi = wr[i];
        const T* xr = xb + i * len;
        for (int64_t t = 0; t < len; ++t) yr[t] += wi * xr[t];
      }
      if (!bias.empty()) {
        const T bo = bias[o];
        for (int64_t t = 0; t < len; ++t) yr[t] += bo;
      }
    }
  }
  return y;
}

template <typename T>
void PointwiseConv1dBackward(const Tensor<T>& x, const Tensor<T>& w,
                             const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw,
                             Tensor<T>* dbias) {
  const int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const int64_t cout = w.dim(0);
  RequireDim("conv1d_pointwise", dy.dim(1), cout, "upstream channels");
  if (dx) *dx = Tensor<T>(x.shape());
  if (dw) EnsureShape(dw, w.shape());
  CMapR<T> wm(w.data(), cout, cin);
  for (int64_t b = 0; b < batch; ++b) {
    CMapR<T> xm(x.data() + b * cin * len, cin, len);
    CMapR<T> gm(dy.data() + b * cout * len, cout, len);
    if (dw) MapR<T>(dw->data(), cout, cin).noalias() += gm * xm.transpose();
    if (dx) MapR<T>(dx->data() + b * cin * len, cin, len).noalias() = wm.transpose() * gm;
    if (dbias) {
      EnsureShape(dbias, {cout});
      VecMap<T>(dbias->data(), cout) += gm.rowwise().sum();
    }
  }
}

// ----------------------------------------------------------------- conv2d --

namespace {

template <typename T>
void Im2Col(const T* x, int64_t cin, int64_t h, int64_t w, int k, int stride,
            int pad, int64_t ho, int64_t wo, T* cols) {
  for (int64_t c = 0; c < cin; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + ((c * k + ki) * k + kj) * ho * wo;
        for (int64_t oi = 0; oi < ho; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          T* out = row + oi * wo;
          if (ii < 0 || ii >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* xin = x + (c * h + ii) * w;
          for (int64_t oj = 0; oj < wo; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            out[oj] = (jj >= 0 && jj < w) ? xin[jj] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Col2Im(const T* cols, int64_t cin, int64_t h, int64_t w, int k,
            int stride, int pad, int64_t ho, int64_t wo, T* x) {
  for (int64_t c = 0; c < cin; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + ((c * k + ki) * k + kj) * ho * wo;
        for (int64_t oi = 0; oi < ho; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          T* xin = x + (c * h + ii) * w;
          const T* in = row + oi * wo;
          for (int64_t oj = 0; oj < wo; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < w) xin[jj] += in[oj];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Conv2dForward(const Tensor<T>& x, const Tensor<T>& w, int stride,
                        int pad) {
  RequireRank("conv2d", x.rank(), 4);
  RequireRank("conv2d", w.rank(), 4);
  RequireDim("conv2d", w.dim(1), x.dim(1), "input channels");
  RequireDim("conv2d", w.dim(3), w.dim(2), "square kernel");
  const int k = static_cast<int>(w.dim(2));
  PVT_CHECK(k % 2 == 1 && stride >= 1 && pad >= 0, "conv2d: need odd kernel, stride >= 1");
  const int64_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0);
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (wd + 2 * pad - k) / stride + 1;
  PVT_CHECK(ho >= 1 && wo >= 1, "conv2d: input smaller than kernel");
  Tensor<T> y({batch, cout, ho, wo});
  std::vector<T> cols(static_cast<std::size_t>(cin * k * k * ho * wo));
  CMapR<T> wm(w.data(), cout, cin * k * k);
  for (int64_t b = 0; b < batch; ++b) {
    Im2Col(x.data() + b * cin * h * wd, cin, h, wd, k, stride, pad, ho, wo, cols.data());
    MapR<T>(y.data() + b * cout * ho * wo, cout, ho * wo).noalias() =
        wm * CMapR<T>(cols.data(), cin * k * k, ho * wo);
  }
  return y;
}

template <typename T>
void Conv2dBackward(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                    const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw) {
  const int k = static_cast<int>(w.dim(2));
  const int64_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0);
  const int64_t ho = dy.dim(2), wo = dy.dim(3);
  if (dx) *dx = Tensor<T>(x.shape());
  if (dw) EnsureShape(dw, w.shape());
  std::vector<T> cols(static_cast<std::size_t>(cin * k * k * ho * wo));
  CMapR<T> wm(w.data(), cout, cin * k * k);
  for (int64_t b = 0; b < batch; ++b) {
    CMapR<T> gm(dy.data() + b * cout * ho * wo, cout, ho * wo);
    if (dw) {
      Im2Col(x.data() + b * cin * h * wd, cin, h, wd, k, stride, pad, ho, wo, cols.data());
      MapR<T>(dw->data(), cout, cin * k * k).noalias() +=
          gm * CMapR<T>(cols.data(), cin * k * k, ho * wo).transpose();
    }
    if (dx) {
      MapR<T>(cols.data(), cin * k * k, ho * wo).noalias() = wm.transpose() * gm;
      Col2Im(cols.data(), cin, h, wd, k, stride, pad, ho, wo, dx->data() + b * cin * h * wd);
    }
  }
}

// -------------------------------------------------------------- batchnorm --

template <typename T>
Tensor<T> BatchNormForward(const Tensor<T>& x, const Tensor<T>& gamma,
                           const Tensor<T>& beta, Tensor<T>* running_mean,
                           Tensor<T>* running_var, Mode mode, double momentum,
                           double eps, BatchNormCache<T>* cache) {
  const ChannelView v = ViewChannels(x);
  RequireDim("batchnorm", gamma.dim(0), v.channels, "gamma");
  RequireDim("batchnorm", beta.dim(0), v.channels, "beta");
  const int64_t n = v.batch * v.inner;
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> scale(v.channels);
  for (int64_t c = 0; c < v.channels; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      if (n == 0) throw ValidationError("batchnorm: zero-size reduction axis");
      double s = 0.0;
      for (int64_t b = 0; b < v.batch; ++b) {
        const T* xr = x.data() + (b * v.channels + c) * v.inner;
        for (int64_t i = 0; i < v.inner; ++i) s += xr[i];
      }
      mean = s / n;
      double ss = 0.0;
      for (int64_t b = 0; b < v.batch; ++b) {
        const T* xr = x.data() + (b * v.channels + c) * v.inner;
        for (int64_t i = 0; i < v.inner; ++i) {
          const double d = xr[i] - mean;
          ss += d * d;
        }
      }
      var = ss / n;
      if (running_mean && running_var) {
        const double unbiased = n > 1 ? ss / (n - 1) : var;
        (*running_mean)[c] = static_cast<T>((1.0 - momentum) * (*running_mean)[c] + momentum * mean);
        (*running_var)[c] = static_cast<T>((1.0 - momentum) * (*running_var)[c] + momentum * unbiased);
      }
    } else {
      mean = (*running_mean)[c];
      var = (*running_var)[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
    const T m = static_cast<T>(mean);
    scale[c] = inv;
    for (int64_t b = 0; b < v.batch; ++b) {
      const int64_t base = (b * v.channels + c) * v.inner;
      for (int64_t i = 0; i < v.inner; ++i) {
        const T h = (x[base + i] - m) * inv;
        xhat[base + i] = h;
        y[base + i] = gamma[c] * h + beta[c];
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->scale = std::move(scale);
    cache->mode = mode;
  }
  return y;
}

template <typename T>
void BatchNormBackward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                       const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                       Tensor<T>* dbeta) {
  const ChannelView v = ViewChannels(cache.xhat);
  const int64_t n = v.batch * v.inner;
  if (dx) *dx = Tensor<T>(cache.xhat.shape());
  if (dgamma) EnsureShape(dgamma, gamma.shape());
  if (dbeta) EnsureShape(dbeta, gamma.shape());
  for (int64_t c = 0; c < v.channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int64_t b = 0; b < v.batch; ++b) {
      const int64_t base = (b * v.channels + c) * v.inner;
      for (int64_t i = 0; i < v.inner; ++i) {
        sum_dy += dy[base + i];
        sum_dy_xhat += static_cast<double>(dy[base + i]) * cache.xhat[base + i];
      }
    }
    if (dgamma) (*dgamma)[c] += static_cast<T>(sum_dy_xhat);
    if (dbeta) (*dbeta)[c] += static_cast<T>(sum_dy);
    if (!dx) continue;
    const T g = gamma[c] * cache.scale[c];
    if (cache.mode == Mode::kEval) {
      for (int64_t b = 0; b < v.batch; ++b) {
        const int64_t base = (b * v.channels + c) * v.inner;
        for (int64_t i = 0; i < v.inner; ++i) (*dx)[base + i] = g * dy[base + i];
      }
      continue;
    }
    const T mean_dy = static_cast<T>(sum_dy / n);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / n);
    for (int64_t b = 0; b < v.batch; ++b) {
      const int64_t base = (b * v.channels + c) * v.inner;
      for (int64_t i = 0; i < v.inner; ++i) {
        (*dx)[base + i] =
            g * (dy[base + i] - mean_dy - cache.xhat[base + i] * mean_dy_xhat);
      }
    }
  }
}

// ------------------------------------------------------------ activations --

template <typename T>
Tensor<T> Relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  if (detail::relu_pattern_hash) {
    uint64_t h = *detail::relu_pattern_hash;
    for (std::size_t i = 0; i < x.size(); ++i) {
      h = (h ^ static_cast<uint64_t>(x[i] > T(0))) * 1099511628211ULL;
    }
    *detail::relu_pattern_hash = h;
  }
  return y;
}

template <typename T>
Tensor<T> ReluBackward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> Sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Branches keep exp() from overflowing for large |x|.
    if (x[i] >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      y[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> SigmoidBackward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  return dx;
}

template <typename T>
Tensor<T> Tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
Tensor<T> TanhBackward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
  return dx;
}

namespace {

struct AxisView {
  int64_t outer, n, inner;
};

template <typename T>
AxisView ViewAxis(const Tensor<T>& x, std::size_t axis) {
  PVT_CHECK(axis < x.rank(), "softmax: axis out of range");
  AxisView v{1, x.dim(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) v.inner *= x.dim(i);
  return v;
}

}  // namespace

template <typename T>
Tensor<T> Softmax(const Tensor<T>& x, std::size_t axis) {
  const AxisView v = ViewAxis(x, axis);
  Tensor<T> y(x.shape());
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      const int64_t base = o * v.n * v.inner + i;
      T mx = x[base];
      for (int64_t k = 1; k < v.n; ++k) mx = std::max(mx, x[base + k * v.inner]);
      T s = 0;
      for (int64_t k = 0; k < v.n; ++k) {
        const T e = std::exp(x[base + k * v.inner] - mx);
        y[base + k * v.inner] = e;
        s += e;
      }
      for (int64_t k = 0; k < v.n; ++k) y[base + k * v.inner] /= s;
    }
  }
  return y;
}

template <typename T>
Tensor<T> SoftmaxBackward(const Tensor<T>& y, const Tensor<T>& dy,
                          std::size_t axis) {
  const AxisView v = ViewAxis(y, axis);
  Tensor<T> dx(y.shape());
  for (int64_t o = 0; o < v.outer; ++o) {
    for (int64_t i = 0; i < v.inner; ++i) {
      const int64_t base = o * v.n * v.inner + i;
      T dot = 0;
      for (int64_t k = 0; k < v.n; ++k) dot += y[base + k * v.inner] * dy[base + k * v.inner];
      for (int64_t k = 0; k < v.n; ++k) {
        const int64_t j = base + k * v.inner;
        dx[j] = y[j] * (dy[j] - dot);
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> Activate(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return Relu(x);
    case Activation::kSigmoid:
      return Sigmoid(x);
    case Activation::kTanh:
      return Tanh(x);
    case Activation::kSoftmax:
      return Softmax(x, x.rank() - 1);
  }
  return x;
}

// ------------------------------------------------------------------ dense --

template <typename T>
Tensor<T> DenseForward(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& b) {
  RequireRank("dense", x.rank(), 2);
  RequireRank("dense", w.rank(), 2);
  RequireDim("dense", w.dim(1), x.dim(1), "input dim");
  const int64_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  if (!b.empty()) RequireDim("dense", b.dim(0), dout, "bias");
  Tensor<T> y({n, dout});
  MapR<T> ym(y.data(), n, dout);
  ym.noalias() = CMapR<T>(x.data(), n, din) * CMapR<T>(w.data(), dout, din).transpose();
  if (!b.empty()) ym.rowwise() += CVecMap<T>(b.data(), dout).transpose();
  return y;
}

template <typename T>
void DenseBackward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                   Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const int64_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
  RequireDim("dense", dy.dim(1), dout, "upstream dim");
  CMapR<T> gm(dy.data(), n, dout);
  if (dx) {
    *dx = Tensor<T>(x.shape());
    MapR<T>(dx->data(), n, din).noalias() = gm * CMapR<T>(w.data(), dout, din);
  }
  if (dw) {
    EnsureShape(dw, w.shape());
    MapR<T>(dw->data(), dout, din).noalias() += gm.transpose() * CMapR<T>(x.data(), n, din);
  }
  if (db) {
    EnsureShape(db, {dout});
    VecMap<T>(db->data(), dout) += gm.colwise().sum().transpose();
  }
}

// --------------------------------------------------------------- SE gates --

template <typename T>
Tensor<T> SeGate1dForward(const Tensor<T>& x, const Tensor<T>& w1,
                          const Tensor<T>& b1, const Tensor<T>& w2,
                          const Tensor<T>& b2, int window, SeCache<T>* cache) {
  RequireRank("se_gate", x.rank(), 3);
  PVT_CHECK(window >= 1, "se_gate: window must be >= 1");
  const int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  RequireDim("se_gate", w1.dim(1), channels, "w1 columns");
  RequireDim("se_gate", w2.dim(0), channels, "w2 rows");
  RequireDim("se_gate", w2.dim(1), w1.dim(0), "bottleneck");
  Tensor<T> pooled(x.shape());
  for (int64_t r = 0; r < batch * channels; ++r) {
    const T* xr = x.data() + r * len;
    T* pr = pooled.data() + r * len;
    for (int64_t t = 0; t < len; ++t) {
      T acc = 0;
      for (int64_t s = std::max<int64_t>(0, t - window + 1); s <= t; ++s) acc += xr[s];
      pr[t] = acc / static_cast<T>(window);
    }
  }
  Tensor<T> hidden_pre = PointwiseConv1dForward(pooled, w1, b1);
  Tensor<T> hidden = Relu(hidden_pre);
  Tensor<T> gate = Sigmoid(PointwiseConv1dForward(hidden, w2, b2));
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * gate[i];
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->hidden_pre = std::move(hidden_pre);
    cache->gate = std::move(gate);
  }
  return y;
}

template <typename T>
void SeGate1dBackward(const Tensor<T>& x, const Tensor<T>& w1,
                      const Tensor<T>& w2, int window, const SeCache<T>& cache,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw1,
                      Tensor<T>* db1, Tensor<T>* dw2, Tensor<T>* db2) {
  const int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  Tensor<T> dz2(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T g = cache.gate[i];
    dz2[i] = dy[i] * x[i] * g * (T(1) - g);
  }
  Tensor<T> hidden = Relu(cache.hidden_pre);
  Tensor<T> dhidden;
  PointwiseConv1dBackward(hidden, w2, dz2, &dhidden, dw2, db2);
  Tensor<T> dz1 = ReluBackward(cache.hidden_pre, dhidden);
  Tensor<T> dpooled;
  PointwiseConv1dBackward(cache.pooled, w1, dz1, &dpooled, dw1, db1);
  if (!dx) return;
  *dx = Tensor<T>(x.shape());
  const T inv_w = T(1) / static_cast<T>(window);
  for (int64_t r = 0; r < batch * channels; ++r) {
    const T* gp = dpooled.data() + r * len;
    T* out = dx->data() + r * len;
    const int64_t base = r * len;
    // dx[s] += (1/w) * sum_{t=s}^{s+w-1} dp[t], as a sliding window sum.
    T acc = 0;
    for (int64_t t = len - 1; t >= 0; --t) {
      acc += gp[t];
      if (t + window < len) acc -= gp[t + window];
      out[t] = dy[base + t] * cache.gate[base + t] + acc * inv_w;
    }
  }
}

template <typename T>
Tensor<T> SeGlobalForward(const Tensor<T>& x, const Tensor<T>& w1,
                          const Tensor<T>& b1, const Tensor<T>& w2,
                          const Tensor<T>& b2, SeCache<T>* cache) {
  const ChannelView v = ViewChannels(x);
  Tensor<T> pooled({v.batch, v.channels});
  for (int64_t r = 0; r < v.batch * v.channels; ++r) {
    T acc = 0;
    for (int64_t i = 0; i < v.inner; ++i) acc += x[r * v.inner + i];
    pooled[r] = acc / static_cast<T>(v.inner);
  }
  Tensor<T> hidden_pre = DenseForward(pooled, w1, b1);
  Tensor<T> gate = Sigmoid(DenseForward(Relu(hidden_pre), w2, b2));
  Tensor<T> y(x.shape());
  for (int64_t r = 0; r < v.batch * v.channels; ++r) {
    for (int64_t i = 0; i < v.inner; ++i) y[r * v.inner + i] = x[r * v.inner + i] * gate[r];
  }
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->hidden_pre = std::move(hidden_pre);
    cache->gate = std::move(gate);
  }
  return y;
}

template <typename T>
void SeGlobalBackward(const Tensor<T>& x, const Tensor<T>& w1,
                      const Tensor<T>& w2, const SeCache<T>& cache,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw1,
                      Tensor<T>* db1, Tensor<T>* dw2, Tensor<T>* db2) {
  const ChannelView v = ViewChannels(x);
  Tensor<T> dz2({v.batch, v.channels});
  for (int64_t r = 0; r < v.batch * v.channels; ++r) {
    T acc = 0;
    for (int64_t i = 0; i < v.inner; ++i) acc += dy[r * v.inner + i] * x[r * v.inner + i];
    const T g = cache.gate[r];
    dz2[r] = acc * g * (T(1) - g);
  }
  Tensor<T> dhidden;
  DenseBackward(Relu(cache.hidden_pre), w2, dz2, &dhidden, dw2, db2);
  Tensor<T> dz1 = ReluBackward(cache.hidden_pre, dhidden);
  Tensor<T> dpooled;
  DenseBackward(cache.pooled, w1, dz1, &dpooled, dw1, db1);
  if (!dx) return;
  *dx = Tensor<T>(x.shape());
  const T inv = T(1) / static_cast<T>(v.inner);
  for (int64_t r = 0; r < v.batch * v.channels; ++r) {
    for (int64_t i = 0; i < v.inner; ++i) {
      const int64_t j = r * v.inner + i;
      (*dx)[j] = dy[j] * cache.gate[r] + dpooled[r] * inv;
    }
  }
}

// ----------------------------------------------------------- l2 normalize --

template <typename T>
Tensor<T> L2NormalizeForward(const Tensor<T>& x, double eps) {
  RequireRank("l2_normalize", x.rank(), 2);
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<T> y(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (int64_t j = 0; j < d; ++j) ss += static_cast<double>(x[i * d + j]) * x[i * d + j];
    const double norm = std::max(std::sqrt(ss), eps);
    for (int64_t j = 0; j < d; ++j) y[i * d + j] = static_cast<T>(x[i * d + j] / norm);
  }
  return y;
}

template <typename T>
Tensor<T> L2NormalizeBackward(const Tensor<T>& x, const Tensor<T>& y,
                              const Tensor<T>& dy, double eps) {
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<T> dx(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    double ss = 0.0, dot = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      ss += static_cast<double>(x[i * d + j]) * x[i * d + j];
      dot += static_cast<double>(y[i * d + j]) * dy[i * d + j];
    }
    const double norm = std::sqrt(ss);
    for (int64_t j = 0; j < d; ++j) {
      const int64_t k = i * d + j;
      dx[k] = norm > eps ? static_cast<T>((dy[k] - y[k] * dot) / norm)
                         : static_cast<T>(dy[k] / eps);
    }
  }
  return dx;
}

// -------------------------------------------------------- attention pool --

template <typename T>
Tensor<T> AttentionPoolForward(const Tensor<T>& h, const Tensor<T>& w,
                               const Tensor<T>& b, const Tensor<T>& v,
                               bool with_std, double eps,
                               AttentionPoolCache<T>* cache) {
  RequireRank("attention_pool", h.rank(), 3);
  const int64_t batch = h.dim(0), dim = h.dim(1), len = h.dim(2);
  const int64_t att = w.dim(0);
  RequireDim("attention_pool", w.dim(1), dim, "attention input");
  PVT_CHECK(len >= 1, "attention_pool: need at least one frame");
  Tensor<T> u = Tanh(PointwiseConv1dForward(h, w, b));
  Tensor<T> scores({batch, len});
  for (int64_t bi = 0; bi < batch; ++bi) {
    MapR<T>(scores.data() + bi * len, 1, len).noalias() =
        CMapR<T>(v.data(), 1, att) * CMapR<T>(u.data() + bi * att * len, att, len);
  }
  Tensor<T> alpha = Softmax(scores, 1);
  const int64_t out_dim = with_std ? 2 * dim : dim;
  Tensor<T> y({batch, out_dim});
  Tensor<T> mu({batch, dim});
  Tensor<T> var({batch, dim});
  for (int64_t bi = 0; bi < batch; ++bi) {
    const T* a = alpha.data() + bi * len;
    for (int64_t d = 0; d < dim; ++d) {
      const T* hr = h.data() + (bi * dim + d) * len;
      T m = 0, m2 = 0;
      for (int64_t t = 0; t < len; ++t) {
        m += a[t] * hr[t];
        m2 += a[t] * hr[t] * hr[t];
      }
      mu[bi * dim + d] = m;
      var[bi * dim + d] = m2 - m * m;
      y[bi * out_dim + d] = m;
      if (with_std) {
        y[bi * out_dim + dim + d] =
            static_cast<T>(std::sqrt(std::max<double>(m2 - m * m, eps)));
      }
    }
  }
  if (cache) {
    cache->u = std::move(u);
    cache->alpha = std::move(alpha);
    cache->mu = std::move(mu);
    cache->var = std::move(var);
  }
  return y;
}

template <typename T>
void AttentionPoolBackward(const Tensor<T>& h, const Tensor<T>& w,
                           const Tensor<T>& v, bool with_std, double eps,
                           const AttentionPoolCache<T>& cache,
                           const Tensor<T>& dy, Tensor<T>* dh, Tensor<T>* dw,
                           Tensor<T>* db, Tensor<T>* dv) {
  const int64_t batch = h.dim(0), dim = h.dim(1), len = h.dim(2);
  const int64_t att = w.dim(0);
  const int64_t out_dim = with_std ? 2 * dim : dim;
  Tensor<T> dh_direct(h.shape());
  Tensor<T> de({batch, len});
  for (int64_t bi = 0; bi < batch; ++bi) {
    const T* a = cache.alpha.data() + bi * len;
    std::vector<T> dalpha(len, T(0));
    for (int64_t d = 0; d < dim; ++d) {
      const T* hr = h.data() + (bi * dim + d) * len;
      T* gr = dh_direct.data() + (bi * dim + d) * len;
      const T mu = cache.mu[bi * dim + d];
      const T dmu = dy[bi * out_dim + d];
      T dvar = 0;
      if (with_std) {
        const double var = cache.var[bi * dim + d];
        if (var > eps) {
          dvar = static_cast<T>(dy[bi * out_dim + dim + d] / (2.0 * std::sqrt(var)));
        }
      }
      for (int64_t t = 0; t < len; ++t) {
        gr[t] = a[t] * (dmu + T(2) * dvar * (hr[t] - mu));
        dalpha[t] += dmu * hr[t] + dvar * (hr[t] * hr[t] - T(2) * mu * hr[t]);
      }
    }
    T dot = 0;
    for (int64_t t = 0; t < len; ++t) dot += a[t] * dalpha[t];
    for (int64_t t = 0; t < len; ++t) de[bi * len + t] = a[t] * (dalpha[t] - dot);
  }
  // e_t = v . u_t
  Tensor<T> du({batch, att, len});
  if (dv) EnsureShape(dv, v.shape());
  for (int64_t bi = 0; bi < batch; ++bi) {
    for (int64_t k = 0; k < att; ++k) {
      const T* ur = cache.u.data() + (bi * att + k) * len;
      T* dur = du.data() + (bi * att + k) * len;
      T acc = 0;
      for (int64_t t = 0; t < len; ++t) {
        acc += de[bi * len + t] * ur[t];
        dur[t] = v[k] * de[bi * len + t];
      }
      if (dv) (*dv)[k] += acc;
    }
  }
  Tensor<T> dz = TanhBackward(cache.u, du);
  Tensor<T> dh_att;
  PointwiseConv1dBackward(h, w, dz, dh ? &dh_att : nullptr, dw, db);
  if (dh) {
    *dh = std::move(dh_direct);
    for (std::size_t i = 0; i < dh->size(); ++i) (*dh)[i] += dh_att[i];
  }
}

// ----------------------------------------------------------------- layers --

template <typename T>
void HeUniform(Tensor<T>* t, int64_t fan_in, Rng* rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<int64_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : t->vec()) x = static_cast<T>(dist(*rng));
}

template <typename T>
DepthwiseConv1d<T>::DepthwiseConv1d(int channels, int kernel, int dilation,
                                    bool causal)
    : weight({channels, kernel}),
      kernel_(kernel),
      dilation_(dilation),
      causal_(causal) {
  PVT_CHECK(kernel >= 1 && dilation >= 1, "depthwise conv: need K >= 1 and d >= 1");
}

template <typename T>
void DepthwiseConv1d<T>::Init(Rng* rng) {
  HeUniform(&weight.value, kernel_, rng);
}

template <typename T>
void DepthwiseConv1d<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".weight", &weight);
}

template <typename T>
Tensor<T> DepthwiseConv1d<T>::Forward(const Tensor<T>& x) {
  x_ = x;
  return DepthwiseConv1dForward(x, weight.value, dilation_, causal_);
}

template <typename T>
Tensor<T> DepthwiseConv1d<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  DepthwiseConv1dBackward(x_, weight.value, dilation_, causal_, dy, &dx, &weight.grad);
  return dx;
}

template <typename T>
PointwiseConv1d<T>::PointwiseConv1d(int in_channels, int out_channels, bool bias)
    : weight({out_channels, in_channels}), has_bias_(bias) {
  if (bias) this->bias = Param<T>({out_channels});
}

template <typename T>
void PointwiseConv1d<T>::Init(Rng* rng) {
  HeUniform(&weight.value, weight.value.dim(1), rng);
  if (has_bias_) bias.value.Fill(T(0));
}

template <typename T>
void PointwiseConv1d<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".weight", &weight);
  if (has_bias_) store->AddParam(prefix + ".bias", &bias);
}

template <typename T>
Tensor<T> PointwiseConv1d<T>::Forward(const Tensor<T>& x) {
  x_ = x;
  return PointwiseConv1dForward(x, weight.value, has_bias_ ? bias.value : Tensor<T>());
}

template <typename T>
Tensor<T> PointwiseConv1d<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  PointwiseConv1dBackward(x_, weight.value, dy, &dx, &weight.grad,
                          has_bias_ ? &bias.grad : nullptr);
  return dx;
}

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight({out_channels, in_channels, kernel, kernel}), stride_(stride), pad_(pad) {}

template <typename T>
void Conv2d<T>::Init(Rng* rng) {
  HeUniform(&weight.value, weight.value.dim(1) * weight.value.dim(2) * weight.value.dim(3), rng);
}

template <typename T>
void Conv2d<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".weight", &weight);
}

template <typename T>
Tensor<T> Conv2d<T>::Forward(const Tensor<T>& x) {
  x_ = x;
  return Conv2dForward(x, weight.value, stride_, pad_);
}

template <typename T>
Tensor<T> Conv2d<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  Conv2dBackward(x_, weight.value, stride_, pad_, dy, &dx, &weight.grad);
  return dx;
}

template <typename T>
BatchNorm<T>::BatchNorm(int channels, double momentum, double eps)
    : gamma({channels}),
      beta({channels}),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)),
      momentum_(momentum),
      eps_(eps) {
  gamma.value.Fill(T(1));
}

template <typename T>
void BatchNorm<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".gamma", &gamma);
  store->AddParam(prefix + ".beta", &beta);
  store->AddBuffer(prefix + ".running_mean", &running_mean);
  store->AddBuffer(prefix + ".running_var", &running_var);
}

template <typename T>
Tensor<T> BatchNorm<T>::Forward(const Tensor<T>& x, Mode mode) {
  return BatchNormForward(x, gamma.value, beta.value, &running_mean, &running_var,
                          mode, momentum_, eps_, &cache_);
}

template <typename T>
Tensor<T> BatchNorm<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  BatchNormBackward(cache_, gamma.value, dy, &dx, &gamma.grad, &beta.grad);
  return dx;
}

template <typename T>
void BatchNorm<T>::EvalAffine(std::vector<T>* a, std::vector<T>* c) const {
  const auto n = static_cast<std::size_t>(gamma.value.size());
  a->resize(n);
  c->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[i]) + eps_));
    (*a)[i] = gamma.value[i] * inv;
    (*c)[i] = beta.value[i] - running_mean[i] * gamma.value[i] * inv;
  }
}

template <typename T>
Dense<T>::Dense(int in_dim, int out_dim, bool bias)
    : weight({out_dim, in_dim}), has_bias_(bias) {
  if (bias) this->bias = Param<T>({out_dim});
}

template <typename T>
void Dense<T>::Init(Rng* rng) {
  HeUniform(&weight.value, weight.value.dim(1), rng);
  if (has_bias_) bias.value.Fill(T(0));
}

template <typename T>
void Dense<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".weight", &weight);
  if (has_bias_) store->AddParam(prefix + ".bias", &bias);
}

template <typename T>
Tensor<T> Dense<T>::Forward(const Tensor<T>& x) {
  x_ = x;
  return DenseForward(x, weight.value, has_bias_ ? bias.value : Tensor<T>());
}

template <typename T>
Tensor<T> Dense<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  DenseBackward(x_, weight.value, dy, &dx, &weight.grad, has_bias_ ? &bias.grad : nullptr);
  return dx;
}

template <typename T>
SeGate<T>::SeGate(int channels, int reduction, int window) : window_(window) {
  PVT_CHECK(reduction >= 1 && channels % reduction == 0,
            "se gate: reduction must divide channels");
  PVT_CHECK(window >= 0, "se gate: window must be >= 0");
  const int hidden = channels / reduction;
  w1 = Param<T>({hidden, channels});
  b1 = Param<T>({hidden});
  w2 = Param<T>({channels, hidden});
  b2 = Param<T>({channels});
}

template <typename T>
void SeGate<T>::Init(Rng* rng) {
  HeUniform(&w1.value, w1.value.dim(1), rng);
  HeUniform(&w2.value, w2.value.dim(1), rng);
  b1.value.Fill(T(0));
  b2.value.Fill(T(0));
}

template <typename T>
void SeGate<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".w1", &w1);
  store->AddParam(prefix + ".b1", &b1);
  store->AddParam(prefix + ".w2", &w2);
  store->AddParam(prefix + ".b2", &b2);
}

template <typename T>
Tensor<T> SeGate<T>::Forward(const Tensor<T>& x) {
  x_ = x;
  if (window_ > 0) {
    return SeGate1dForward(x, w1.value, b1.value, w2.value, b2.value, window_, &cache_);
  }
  return SeGlobalForward(x, w1.value, b1.value, w2.value, b2.value, &cache_);
}

template <typename T>
Tensor<T> SeGate<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dx;
  if (window_ > 0) {
    SeGate1dBackward(x_, w1.value, w2.value, window_, cache_, dy, &dx, &w1.grad,
                     &b1.grad, &w2.grad, &b2.grad);
  } else {
    SeGlobalBackward(x_, w1.value, w2.value, cache_, dy, &dx, &w1.grad, &b1.grad,
                     &w2.grad, &b2.grad);
  }
  return dx;
}

template <typename T>
AttentionPool<T>::AttentionPool(int in_dim, int attention_dim, bool with_std,
                                double eps)
    : w({attention_dim, in_dim}),
      b({attention_dim}),
      v({attention_dim}),
      with_std_(with_std),
      eps_(eps) {}

template <typename T>
void AttentionPool<T>::Init(Rng* rng) {
  HeUniform(&w.value, w.value.dim(1), rng);
  HeUniform(&v.value, v.value.dim(0), rng);
  b.value.Fill(T(0));
}

template <typename T>
void AttentionPool<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  store->AddParam(prefix + ".w", &w);
  store->AddParam(prefix + ".b", &b);
  store->AddParam(prefix + ".v", &v);
}

template <typename T>
int AttentionPool<T>::output_dim() const {
  const int d = static_cast<int>(w.value.dim(1));
  return with_std_ ? 2 * d : d;
}

template <typename T>
Tensor<T> AttentionPool<T>::Forward(const Tensor<T>& h) {
  h_ = h;
  return AttentionPoolForward(h, w.value, b.value, v.value, with_std_, eps_, &cache_);
}

template <typename T>
Tensor<T> AttentionPool<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> dh;
  AttentionPoolBackward(h_, w.value, v.value, with_std_, eps_, cache_, dy, &dh,
                        &w.grad, &b.grad, &v.grad);
  return dh;
}

template <typename T>
Tensor<T> DepthwiseConv1d<T>::Infer(const Tensor<T>& x) const {
  return DepthwiseConv1dForward(x, weight.value, dilation_, causal_);
}

template <typename T>
Tensor<T> PointwiseConv1d<T>::Infer(const Tensor<T>& x) const {
  return PointwiseConv1dForward(x, weight.value, has_bias_ ? bias.value : Tensor<T>());
}

template <typename T>
Tensor<T> Conv2d<T>::Infer(const Tensor<T>& x) const {
  return Conv2dForward(x, weight.value, stride_, pad_);
}

template <typename T>
Tensor<T> BatchNorm<T>::Infer(const Tensor<T>& x) const {
  // Eval mode never writes the running statistics.
  return BatchNormForward(x, gamma.value, beta.value,
                          const_cast<Tensor<T>*>(&running_mean),
                          const_cast<Tensor<T>*>(&running_var), Mode::kEval,
                          momentum_, eps_, static_cast<BatchNormCache<T>*>(nullptr));
}

template <typename T>
Tensor<T> Dense<T>::Infer(const Tensor<T>& x) const {
  return DenseForward(x, weight.value, has_bias_ ? bias.value : Tensor<T>());
}

template <typename T>
Tensor<T> SeGate<T>::Infer(const Tensor<T>& x) const {
  if (window_ > 0) {
    return SeGate1dForward(x, w1.value, b1.value, w2.value, b2.value, window_,
                           static_cast<SeCache<T>*>(nullptr));
  }
  return SeGlobalForward(x, w1.value, b1.value, w2.value, b2.value,
                         static_cast<SeCache<T>*>(nullptr));
}

template <typename T>
Tensor<T> AttentionPool<T>::Infer(const Tensor<T>& h) const {
  return AttentionPoolForward(h, w.value, b.value, v.value, with_std_, eps_,
                              static_cast<AttentionPoolCache<T>*>(nullptr));
}

#define PVT_INSTANTIATE_LAYERS(T)                                                   \
  template Tensor<T> DepthwiseConv1dForward(const Tensor<T>&, const Tensor<T>&, int, bool); \
  template void DepthwiseConv1dBackward(const Tensor<T>&, const Tensor<T>&, int, bool,     \
                                        const Tensor<T>&, Tensor<T>*, Tensor<T>*);        \
  template Tensor<T> PointwiseConv1dForward(const Tensor<T>&, const Tensor<T>&,           \
                                            const Tensor<T>&);                            \
  template void PointwiseConv1dBackward(const Tensor<T>&, const Tensor<T>&,               \
                                        const Tensor<T>&, Tensor<T>*, Tensor<T>*,         \
                                        Tensor<T>*);                                      \
  template Tensor<T> Conv2dForward(const Tensor<T>&, const Tensor<T>&, int, int);         \
  template void Conv2dBackward(const Tensor<T>&, const Tensor<T>&, int, int,              \
                               const Tensor<T>&, Tensor<T>*, Tensor<T>*);                 \
  template Tensor<T> BatchNormForward(const Tensor<T>&, const Tensor<T>&,                 \
                                      const Tensor<T>&, Tensor<T>*, Tensor<T>*, Mode,     \
                                      double, double, BatchNormCache<T>*);                \
  template void BatchNormBackward(const BatchNormCache<T>&, const Tensor<T>&,             \
                                  const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);  \
  template Tensor<T> Relu(const Tensor<T>&);                                              \
  template Tensor<T> ReluBackward(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> Sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> SigmoidBackward(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> Tanh(const Tensor<T>&);                                              \
  template Tensor<T> TanhBackward(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> Softmax(const Tensor<T>&, std::size_t);                              \
  template Tensor<T> SoftmaxBackward(const Tensor<T>&, const Tensor<T>&, std::size_t);    \
  template Tensor<T> Activate(const Tensor<T>&, Activation);                              \
  template Tensor<T> DenseForward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template void DenseBackward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                              Tensor<T>*, Tensor<T>*, Tensor<T>*);                        \
  template Tensor<T> SeGate1dForward(const Tensor<T>&, const Tensor<T>&,                  \
                                     const Tensor<T>&, const Tensor<T>&,                  \
                                     const Tensor<T>&, int, SeCache<T>*);                 \
  template void SeGate1dBackward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                 int, const SeCache<T>&, const Tensor<T>&, Tensor<T>*,    \
                                 Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*);         \
  template Tensor<T> SeGlobalForward(const Tensor<T>&, const Tensor<T>&,                  \
                                     const Tensor<T>&, const Tensor<T>&,                  \
                                     const Tensor<T>&, SeCache<T>*);                      \
  template void SeGlobalBackward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                 const SeCache<T>&, const Tensor<T>&, Tensor<T>*,         \
                                 Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*);         \
  template Tensor<T> L2NormalizeForward(const Tensor<T>&, double);                        \
  template Tensor<T> L2NormalizeBackward(const Tensor<T>&, const Tensor<T>&,              \
                                         const Tensor<T>&, double);                       \
  template Tensor<T> AttentionPoolForward(const Tensor<T>&, const Tensor<T>&,             \
                                          const Tensor<T>&, const Tensor<T>&, bool,       \
                                          double, AttentionPoolCache<T>*);                \
  template void AttentionPoolBackward(const Tensor<T>&, const Tensor<T>&,                 \
                                      const Tensor<T>&, bool, double,                     \
                                      const AttentionPoolCache<T>&, const Tensor<T>&,     \
                                      Tensor<T>*, Tensor<T>*, Tensor<T>*, Tensor<T>*);    \
  template void HeUniform(Tensor<T>*, int64_t, Rng*);                                     \
  template class DepthwiseConv1d<T>;                                                      \
  template class PointwiseConv1d<T>;                                                      \
  template class Conv2d<T>;                                                               \
  template class BatchNorm<T>;                                                            \
  template class Dense<T>;                                                                \
  template class SeGate<T>;                                                               \
  template class AttentionPool<T>;

PVT_INSTANTIATE_LAYERS(float)
PVT_INSTANTIATE_LAYERS(double)

}  // namespace pvt
