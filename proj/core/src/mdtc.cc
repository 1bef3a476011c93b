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

#include "pvt/mdtc.h"

#include <algorithm>
#include <sstream>

namespace pvt {

void MdtcConfig::Validate() const {
  PVT_CHECK(input_dim >= 1, "mdtc: input_dim must be >= 1");
  PVT_CHECK(channels >= 1, "mdtc: channels must be >= 1");
  PVT_CHECK(stacks >= 1, "mdtc: stacks must be >= 1");
  PVT_CHECK(!dilations.empty(), "mdtc: need at least one block per stack");
  for (int d : dilations) PVT_CHECK(d >= 1, "mdtc: dilations must be >= 1");
  PVT_CHECK(kernel >= 1 && kernel % 2 == 1, "mdtc: kernel must be odd and >= 1");
  PVT_CHECK(se_reduction >= 1 && channels % se_reduction == 0,
            "mdtc: se_reduction must divide channels");
  PVT_CHECK(se_window >= 1, "mdtc: se_window must be >= 1");
  PVT_CHECK(bn_momentum > 0.0 && bn_momentum <= 1.0, "mdtc: bn_momentum in (0, 1]");
}

std::string MdtcConfig::Fingerprint() const {
  std::ostringstream os;
  os << "mdtc:" << input_dim << ":" << channels << ":" << stacks << ":[";
  for (std::size_t i = 0; i < dilations.size(); ++i) os << (i ? "," : "") << dilations[i];
  os << "]:" << kernel << ":" << se_reduction << ":" << se_window << ":" << causal;
  return os.str();
}

int64_t ReceptiveField(const MdtcConfig& cfg) {
  int64_t per_stack = 0;
  for (int d : cfg.dilations) {
    per_stack += static_cast<int64_t>(cfg.kernel - 1) * d + (cfg.se_window - 1);
  }
  return 1 + cfg.stacks * per_stack;
}

int64_t AnalyticParamCount(const MdtcConfig& cfg) {
  const int64_t c = cfg.channels;
  const int64_t h = c / cfg.se_reduction;
  const int64_t depthwise = c * cfg.kernel;
  const int64_t pointwise = 2 * c * c;
  const int64_t bn = 3 * 2 * c;
  const int64_t se = 2 * c * h + h + c;
  const int64_t block = depthwise + pointwise + bn + se;
  const int64_t input = cfg.input_dim * c + c + 2 * c;
  const int64_t classifier = c + 1;
  return static_cast<int64_t>(cfg.stacks) * cfg.blocks_per_stack() * block + input +
         classifier;
}

// ------------------------------------------------------------- DtcBlock --

template <typename T>
DtcBlock<T>::DtcBlock(int channels, int kernel, int dilation, int se_reduction,
                      int se_window, bool causal, double bn_momentum)
    : depthwise(channels, kernel, dilation, causal),
      bn1(channels, bn_momentum),
      point1(channels, channels, false),
      bn2(channels, bn_momentum),
      point2(channels, channels, false),
      bn3(channels, bn_momentum),
      se(channels, se_reduction, se_window) {}

template <typename T>
void DtcBlock<T>::Init(Rng* rng) {
  depthwise.Init(rng);
  point1.Init(rng);
  point2.Init(rng);
  se.Init(rng);
}

template <typename T>
void DtcBlock<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  depthwise.Register(store, prefix + ".depthwise");
  bn1.Register(store, prefix + ".bn1");
  point1.Register(store, prefix + ".point1");
  bn2.Register(store, prefix + ".bn2");
  point2.Register(store, prefix + ".point2");
  bn3.Register(store, prefix + ".bn3");
  se.Register(store, prefix + ".se");
}

template <typename T>
Tensor<T> DtcBlock<T>::Forward(const Tensor<T>& x, Mode mode) {
  pre1_ = bn1.Forward(depthwise.Forward(x), mode);
  pre2_ = bn2.Forward(point1.Forward(Relu(pre1_)), mode);
  Tensor<T> s = se.Forward(bn3.Forward(point2.Forward(Relu(pre2_)), mode));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += x[i];
  pre_out_ = std::move(s);
  return Relu(pre_out_);
}

template <typename T>
Tensor<T> DtcBlock<T>::Backward(const Tensor<T>& dy) {
  Tensor<T> d_sum = ReluBackward(pre_out_, dy);
  Tensor<T> g = bn3.Backward(se.Backward(d_sum));
  g = bn2.Backward(ReluBackward(pre2_, point2.Backward(g)));
  g = bn1.Backward(ReluBackward(pre1_, point1.Backward(g)));
  Tensor<T> dx = depthwise.Backward(g);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d_sum[i];
  return dx;
}

template <typename T>
Tensor<T> DtcBlock<T>::Infer(const Tensor<T>& x) const {
  Tensor<T> h = Relu(bn1.Infer(depthwise.Infer(x)));
  h = Relu(bn2.Infer(point1.Infer(h)));
  h = se.Infer(bn3.Infer(point2.Infer(h)));
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += x[i];
  return Relu(h);
}

// ------------------------------------------------------------ MdtcModel --

template <typename T>
MdtcModel<T> MdtcModel<T>::Build(const MdtcConfig& cfg, uint64_t seed) {
  cfg.Validate();
  MdtcModel m;
  m.cfg_ = cfg;
  m.input_conv_ = PointwiseConv1d<T>(cfg.input_dim, cfg.channels, true);
  m.input_bn_ = BatchNorm<T>(cfg.channels, cfg.bn_momentum);
  for (int s = 0; s < cfg.stacks; ++s) {
    for (int d : cfg.dilations) {
      m.blocks_.emplace_back(cfg.channels, cfg.kernel, d, cfg.se_reduction,
                             cfg.se_window, cfg.causal, cfg.bn_momentum);
    }
  }
  m.classifier_ = PointwiseConv1d<T>(cfg.channels, 1, true);
  Rng rng(seed);
  m.input_conv_.Init(&rng);
  for (auto& b : m.blocks_) b.Init(&rng);
  m.classifier_.Init(&rng);
  return m;
}

template <typename T>
ParamStore<T> MdtcModel<T>::Params() {
  ParamStore<T> store;
  input_conv_.Register(&store, "input.conv");
  input_bn_.Register(&store, "input.bn");
  const int per_stack = cfg_.blocks_per_stack();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].Register(&store, "stack" + std::to_string(i / per_stack) + ".block" +
                                    std::to_string(i % per_stack));
  }
  classifier_.Register(&store, "classifier");
  return store;
}

template <typename T>
int64_t MdtcModel<T>::NumParams() const {
  return const_cast<MdtcModel*>(this)->Params().NumParams();
}

template <typename T>
Tensor<T> MdtcModel<T>::Forward(const Tensor<T>& feats, Mode mode) {
  if (feats.rank() != 3 || feats.dim(1) != cfg_.input_dim) {
    throw ValidationError("mdtc: expected input [B, " + std::to_string(cfg_.input_dim) +
                          ", T], got " + ShapeString(feats.shape()));
  }
  input_pre_ = input_bn_.Forward(input_conv_.Forward(feats), mode);
  Tensor<T> cur = Relu(input_pre_);
  Tensor<T> sum(cur.shape());
  const int per_stack = cfg_.blocks_per_stack();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    cur = blocks_[i].Forward(cur, mode);
    if ((static_cast<int>(i) + 1) % per_stack == 0) {
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += cur[j];
    }
  }
  Tensor<T> post = Sigmoid(classifier_.Forward(sum));
  post.Reshape({feats.dim(0), feats.dim(2)});
  post_ = post;
  return post;
}

template <typename T>
Tensor<T> MdtcModel<T>::Backward(const Tensor<T>& d_post) {
  if (d_post.shape() != post_.shape()) {
    throw ValidationError("mdtc: backward gradient shape " + ShapeString(d_post.shape()) +
                          " does not match forward output " + ShapeString(post_.shape()));
  }
  Tensor<T> d_logit = SigmoidBackward(post_, d_post);
  d_logit.Reshape({post_.dim(0), 1, post_.dim(1)});
  const Tensor<T> d_sum = classifier_.Backward(d_logit);
  const int per_stack = cfg_.blocks_per_stack();
  Tensor<T> g(d_sum.shape());
  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
    if ((i + 1) % per_stack == 0) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += d_sum[j];
    }
    g = blocks_[i].Backward(g);
  }
  g = input_bn_.Backward(ReluBackward(input_pre_, g));
  return input_conv_.Backward(g);
}

template <typename T>
Tensor<T> MdtcModel<T>::Infer(const Tensor<T>& feats) const {
  if (feats.rank() != 3 || feats.dim(1) != cfg_.input_dim) {
    throw ValidationError("mdtc: expected input [B, " + std::to_string(cfg_.input_dim) +
                          ", T], got " + ShapeString(feats.shape()));
  }
  Tensor<T> cur = Relu(input_bn_.Infer(input_conv_.Infer(feats)));
  Tensor<T> sum(cur.shape());
  const int per_stack = cfg_.blocks_per_stack();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    cur = blocks_[i].Infer(cur);
    if ((static_cast<int>(i) + 1) % per_stack == 0) {
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += cur[j];
    }
  }
  Tensor<T> post = Sigmoid(classifier_.Infer(sum));
  post.Reshape({feats.dim(0), feats.dim(2)});
  return post;
}

template <typename T>
Tensor<T> FeaturesToTensor(const FeatureMatrix& feat) {
  const auto len = static_cast<int64_t>(feat.num_frames());
  const auto dim = static_cast<int64_t>(feat.dim());
  Tensor<T> x({1, dim, len});
  for (int64_t t = 0; t < len; ++t) {
    for (int64_t d = 0; d < dim; ++d) x[d * len + t] = static_cast<T>(feat(t, d));
  }
  return x;
}

template <typename T>
PosteriorTrack MdtcModel<T>::Posteriors(const FeatureMatrix& feat) const {
  if (static_cast<int>(feat.dim()) != cfg_.input_dim) {
    throw ValidationError("mdtc: feature dimension " + std::to_string(feat.dim()) +
                          " != input_dim " + std::to_string(cfg_.input_dim));
  }
  PosteriorTrack track;
  if (feat.num_frames() == 0) return track;
  const Tensor<T> post = Infer(FeaturesToTensor<T>(feat));
  track.posteriors.assign(post.vec().begin(), post.vec().end());
  return track;
}

// ------------------------------------------------------------- streaming --

template <typename T>
void MdtcStreamState<T>::Ring::Init(int64_t cap, int64_t ch) {
  capacity = cap;
  channels = ch;
  head = cap > 0 ? cap - 1 : 0;
  data.assign(static_cast<std::size_t>(cap * ch), T(0));
}

template <typename T>
void MdtcStreamState<T>::Ring::Push(const T* frame) {
  if (capacity == 0) return;
  head = (head + 1) % capacity;
  std::copy(frame, frame + channels, data.begin() + head * channels);
}

template <typename T>
const T* MdtcStreamState<T>::Ring::At(int64_t lag) const {
  const int64_t slot = ((head - lag) % capacity + capacity) % capacity;
  return data.data() + slot * channels;
}

template <typename T>
MdtcStreamState<T> MdtcModel<T>::NewStream() const {
  if (!cfg_.causal) {
    throw ValidationError("mdtc: streaming requires a causal model");
  }
  MdtcStreamState<T> st;
  st.fingerprint_ = cfg_.Fingerprint();
  st.blocks_.resize(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    st.blocks_[i].conv.Init(blocks_[i].depthwise.context(), cfg_.channels);
    st.blocks_[i].se.Init(cfg_.se_window, cfg_.channels);
  }
  return st;
}

template <typename T>
T MdtcModel<T>::StreamPush(MdtcStreamState<T>* state,
                           std::span<const T> frame) const {
  if (state->fingerprint_ != cfg_.Fingerprint() ||
      state->blocks_.size() != blocks_.size()) {
    throw ValidationError("mdtc: stream state was created for a different model");
  }
  if (static_cast<int>(frame.size()) != cfg_.input_dim) {
    throw ValidationError("mdtc: stream frame has dimension " +
                          std::to_string(frame.size()) + ", expected " +
                          std::to_string(cfg_.input_dim));
  }
  const int64_t c = cfg_.channels;
  Tensor<T> in({1, cfg_.input_dim, 1}, std::vector<T>(frame.begin(), frame.end()));
  Tensor<T> cur = Relu(input_bn_.Infer(input_conv_.Infer(in)));
  Tensor<T> sum({1, c, 1});
  const int per_stack = cfg_.blocks_per_stack();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const DtcBlock<T>& blk = blocks_[i];
    auto& bs = state->blocks_[i];
    const int kernel = blk.depthwise.kernel();
    const int dilation = blk.depthwise.dilation();
    const Tensor<T>& w = blk.depthwise.weight.value;
    Tensor<T> h({1, c, 1});
    for (int64_t ch = 0; ch < c; ++ch) {
      T acc = 0;
      for (int k = 0; k < kernel; ++k) {
        const int64_t lag = static_cast<int64_t>(kernel - 1 - k) * dilation;
        const T x = lag == 0 ? cur[ch] : bs.conv.At(lag - 1)[ch];
        acc += w[ch * kernel + k] * x;
      }
      h[ch] = acc;
    }
    bs.conv.Push(cur.data());
    h = Relu(blk.bn1.Infer(h));
    h = Relu(blk.bn2.Infer(blk.point1.Infer(h)));
    h = blk.bn3.Infer(blk.point2.Infer(h));
    bs.se.Push(h.data());
    const int window = cfg_.se_window;
    Tensor<T> pooled({1, c, 1});
    for (int64_t ch = 0; ch < c; ++ch) {
      T acc = 0;
      for (int64_t lag = window - 1; lag >= 0; --lag) acc += bs.se.At(lag)[ch];
      pooled[ch] = acc / static_cast<T>(window);
    }
    const Tensor<T> hidden =
        Relu(PointwiseConv1dForward(pooled, blk.se.w1.value, blk.se.b1.value));
    const Tensor<T> gate =
        Sigmoid(PointwiseConv1dForward(hidden, blk.se.w2.value, blk.se.b2.value));
    for (int64_t ch = 0; ch < c; ++ch) h[ch] = h[ch] * gate[ch] + cur[ch];
    cur = Relu(h);
    if ((static_cast<int>(i) + 1) % per_stack == 0) {
      for (int64_t ch = 0; ch < c; ++ch) sum[ch] += cur[ch];
    }
  }
  ++state->frames_;
  return Sigmoid(classifier_.Infer(sum))[0];
}

template <typename T>
template <typename U>
MdtcModel<U> MdtcModel<T>::Cast() const {
  MdtcModel<U> out = MdtcModel<U>::Build(cfg_, 0);
  CopyParams(const_cast<MdtcModel*>(this)->Params(), out.Params());
  return out;
}

template class DtcBlock<float>;
template class DtcBlock<double>;
template class MdtcModel<float>;
template class MdtcModel<double>;
template class MdtcStreamState<float>;
template class MdtcStreamState<double>;
template MdtcModel<double> MdtcModel<float>::Cast<double>() const;
template MdtcModel<float> MdtcModel<double>::Cast<float>() const;
template Tensor<float> FeaturesToTensor(const FeatureMatrix&);
template Tensor<double> FeaturesToTensor(const FeatureMatrix&);

}  // namespace pvt
