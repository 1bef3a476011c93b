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

#include "pvt/sv_model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pvt {

PoolingKind ParsePoolingKind(const std::string& name) {
  if (name == "asp" || name == "ASP") return PoolingKind::kAsp;
  if (name == "sap" || name == "SAP") return PoolingKind::kSap;
  throw ValidationError("sv: pooling must be asp or sap, got " + name);
}

std::string PoolingKindName(PoolingKind kind) {
  return kind == PoolingKind::kAsp ? "asp" : "sap";
}

SvConfig SvConfig::Preset(const std::string& name) {
  SvConfig cfg;
  if (name == "resnet34se") return cfg;
  if (name == "tiny") {
    cfg.stem_channels = 8;
    cfg.stages = {{8, 1, 1}, {16, 1, 2}};
    cfg.se_reduction = 4;
    cfg.attention_dim = 32;
    cfg.embedding_dim = 64;
    return cfg;
  }
  throw ValidationError("sv: unknown preset '" + name + "' (expected resnet34se or tiny)");
}

int SvConfig::num_blocks() const {
  int n = 0;
  for (const auto& s : stages) n += s.blocks;
  return n;
}

int SvConfig::output_freq() const {
  int f = input_dim;
  for (const auto& s : stages) f = (f - 1) / s.stride + 1;
  return f;
}

int SvConfig::pooled_input_dim() const {
  return stages.empty() ? 0 : stages.back().channels * output_freq();
}

void SvConfig::Validate() const {
  PVT_CHECK(input_dim >= 1, "sv: input_dim must be >= 1");
  PVT_CHECK(stem_channels >= 1, "sv: stem_channels must be >= 1");
  PVT_CHECK(!stages.empty(), "sv: need at least one stage");
  for (const auto& s : stages) {
    PVT_CHECK(s.channels >= 1 && s.blocks >= 1 && s.stride >= 1,
              "sv: stage channels, blocks and stride must be >= 1");
    PVT_CHECK(s.channels % se_reduction == 0, "sv: se_reduction must divide stage channels");
  }
  PVT_CHECK(se_reduction >= 1, "sv: se_reduction must be >= 1");
  PVT_CHECK(attention_dim >= 1 && embedding_dim >= 1, "sv: attention_dim and embedding_dim must be >= 1");
  PVT_CHECK(arcface_scale > 0.0, "sv: arcface scale must be > 0");
  PVT_CHECK(arcface_margin >= 0.0 && arcface_margin < M_PI / 2, "sv: arcface margin must be in [0, pi/2)");
  PVT_CHECK(supcon_temperature > 0.0, "sv: supcon temperature must be > 0");
  PVT_CHECK(supcon_weight >= 0.0, "sv: supcon weight must be >= 0");
  PVT_CHECK(bn_momentum > 0.0 && bn_momentum <= 1.0, "sv: bn_momentum in (0, 1]");
}

std::string SvConfig::Fingerprint() const {
  std::ostringstream os;
  os << "sv:" << input_dim << ":" << stem_channels << ":[";
  for (const auto& s : stages) os << s.channels << "/" << s.blocks << "/" << s.stride << ";";
  os << "]:" << se_reduction << ":" << PoolingKindName(pooling) << ":" << attention_dim << ":"
     << embedding_dim;
  return os.str();
}

// ------------------------------------------------------------ ResBlock2d --

template <typename T>
ResBlock2d<T>::ResBlock2d(int in_channels, int out_channels, int stride, int se_reduction,
                          double bn_momentum)
    : conv1(in_channels, out_channels, 3, stride, 1),
      bn1(out_channels, bn_momentum),
      conv2(out_channels, out_channels, 3, 1, 1),
      bn2(out_channels, bn_momentum),
      se(out_channels, se_reduction, 0),
      projection_(in_channels != out_channels || stride != 1) {
  if (projection_) {
    short_conv = Conv2d<T>(in_channels, out_channels, 1, stride, 0);
    short_bn = BatchNorm<T>(out_channels, bn_momentum);
  }
}

template <typename T>
void ResBlock2d<T>::Init(Rng* rng) {
  conv1.Init(rng);
  conv2.Init(rng);
  se.Init(rng);
  if (projection_) short_conv.Init(rng);
}

template <typename T>
void ResBlock2d<T>::Register(ParamStore<T>* store, const std::string& prefix) {
  conv1.Register(store, prefix + ".conv1");
  bn1.Register(store, prefix + ".bn1");
  conv2.Register(store, prefix + ".conv2");
  bn2.Register(store, prefix + ".bn2");
  se.Register(store, prefix + ".se");
  if (projection_) {
    short_conv.Register(store, prefix + ".shortcut.conv");
    short_bn.Register(store, prefix + ".shortcut.bn");
  }
}

template <typename T>
Tensor<T> ResBlock2d<T>::Forward(const Tensor<T>& x, Mode mode) {
  pre1_ = bn1.Forward(conv1.Forward(x), mode);
  Tensor<T> h = se.Forward(bn2.Forward(conv2.Forward(Relu(pre1_)), mode));
  const Tensor<T> skip = projection_ ? short_bn.Forward(short_conv.Forward(x), mode) : x;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += skip[i];
  pre_out_ = std::move(h);
  return Relu(pre_out_);
}

template <typename T>
Tensor<T> ResBlock2d<T>::Backward(const Tensor<T>& dy) {
  const Tensor<T> d_sum = ReluBackward(pre_out_, dy);
  Tensor<T> g = bn2.Backward(se.Backward(d_sum));
  g = conv1.Backward(bn1.Backward(ReluBackward(pre1_, conv2.Backward(g))));
  const Tensor<T> d_skip = projection_ ? short_conv.Backward(short_bn.Backward(d_sum)) : d_sum;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d_skip[i];
  return g;
}

template <typename T>
Tensor<T> ResBlock2d<T>::Infer(const Tensor<T>& x) const {
  Tensor<T> h = Relu(bn1.Infer(conv1.Infer(x)));
  h = se.Infer(bn2.Infer(conv2.Infer(h)));
  const Tensor<T> skip = projection_ ? short_bn.Infer(short_conv.Infer(x)) : x;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += skip[i];
  return Relu(h);
}

// --------------------------------------------------------------- SvModel --

template <typename T>
SvModel<T> SvModel<T>::Build(const SvConfig& cfg, int n_classes, uint64_t seed) {
  cfg.Validate();
  PVT_CHECK(n_classes >= 0, "sv: n_classes must be >= 0");
  SvModel m;
  m.cfg_ = cfg;
  m.stem_conv_ = Conv2d<T>(1, cfg.stem_channels, 3, 1, 1);
  m.stem_bn_ = BatchNorm<T>(cfg.stem_channels, cfg.bn_momentum);
  int in = cfg.stem_channels;
  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    const auto& st = cfg.stages[s];
    for (int b = 0; b < st.blocks; ++b) {
      m.blocks_.emplace_back(in, st.channels, b == 0 ? st.stride : 1, cfg.se_reduction,
                             cfg.bn_momentum);
      m.block_names_.push_back("stage" + std::to_string(s) + ".block" + std::to_string(b));
      in = st.channels;
    }
  }
  m.pool_ = AttentionPool<T>(cfg.pooled_input_dim(), cfg.attention_dim,
                             cfg.pooling == PoolingKind::kAsp);
  m.embedding_ = Dense<T>(m.pool_.output_dim(), cfg.embedding_dim, true);
  Rng rng(seed);
  m.stem_conv_.Init(&rng);
  for (auto& b : m.blocks_) b.Init(&rng);
  m.pool_.Init(&rng);
  m.embedding_.Init(&rng);
  m.ResetClassifier(n_classes, seed ^ 0x9e3779b97f4a7c15ULL);
  return m;
}

template <typename T>
void SvModel<T>::ResetClassifier(int n_classes, uint64_t seed) {
  PVT_CHECK(n_classes >= 0, "sv: n_classes must be >= 0");
  n_classes_ = n_classes;
  if (n_classes == 0) {
    class_weights = Param<T>();
    return;
  }
  class_weights.value = Tensor<T>({n_classes, cfg_.embedding_dim});
  class_weights.grad = Tensor<T>({n_classes, cfg_.embedding_dim});
  Rng rng(seed);
  HeUniform(&class_weights.value, cfg_.embedding_dim, &rng);
}

template <typename T>
ParamStore<T> SvModel<T>::Params() {
  ParamStore<T> store;
  stem_conv_.Register(&store, "stem.conv");
  stem_bn_.Register(&store, "stem.bn");
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].Register(&store, block_names_[i]);
  pool_.Register(&store, "pool");
  embedding_.Register(&store, "embedding");
  if (n_classes_ > 0) store.AddParam("classifier.weight", &class_weights);
  return store;
}

template <typename T>
int64_t SvModel<T>::NumParams() const {
  return const_cast<SvModel*>(this)->Params().NumParams();
}

template <typename T>
bool SvModel<T>::IsClassifierParam(const std::string& name) {
  return name.rfind("classifier.", 0) == 0;
}

template <typename T>
bool SvModel<T>::IsEmbeddingParam(const std::string& name) {
  return name.rfind("embedding.", 0) == 0;
}

namespace {

template <typename T>
Tensor<T> CheckedMap(const Tensor<T>& feats, int input_dim) {
  if (feats.rank() != 3 || feats.dim(1) != input_dim || feats.dim(2) < 1) {
    throw ValidationError("sv: expected features [B, " + std::to_string(input_dim) +
                          ", T>=1], got " + ShapeString(feats.shape()));
  }
  Tensor<T> x = feats;
  x.Reshape({feats.dim(0), 1, feats.dim(1), feats.dim(2)});
  return x;
}

}  // namespace

template <typename T>
Tensor<T> SvModel<T>::Forward(const Tensor<T>& feats, Mode mode) {
  Tensor<T> x = CheckedMap(feats, cfg_.input_dim);
  stem_pre_ = stem_bn_.Forward(stem_conv_.Forward(x), mode);
  Tensor<T> h = Relu(stem_pre_);
  for (auto& b : blocks_) h = b.Forward(h, mode);
  map_shape_ = h.shape();
  h.Reshape({map_shape_[0], map_shape_[1] * map_shape_[2], map_shape_[3]});
  return embedding_.Forward(pool_.Forward(h));
}

template <typename T>
Tensor<T> SvModel<T>::Backward(const Tensor<T>& d_emb) {
  Tensor<T> g = pool_.Backward(embedding_.Backward(d_emb));
  g.Reshape(map_shape_);
  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) g = blocks_[i].Backward(g);
  g = stem_conv_.Backward(stem_bn_.Backward(ReluBackward(stem_pre_, g)));
  g.Reshape({g.dim(0), g.dim(2), g.dim(3)});
  return g;
}

template <typename T>
Tensor<T> SvModel<T>::Infer(const Tensor<T>& feats) const {
  Tensor<T> h = Relu(stem_bn_.Infer(stem_conv_.Infer(CheckedMap(feats, cfg_.input_dim))));
  for (const auto& b : blocks_) h = b.Infer(h);
  const Shape s = h.shape();
  h.Reshape({s[0], s[1] * s[2], s[3]});
  return embedding_.Infer(pool_.Infer(h));
}

template <typename T>
template <typename U>
SvModel<U> SvModel<T>::Cast() const {
  SvModel<U> out = SvModel<U>::Build(cfg_, n_classes_, 0);
  CopyParams(const_cast<SvModel*>(this)->Params(), out.Params());
  return out;
}

template <typename T>
Tensor<T> FeaturesToMap(const FeatureMatrix& feat) {
  const auto len = static_cast<int64_t>(feat.num_frames());
  const auto dim = static_cast<int64_t>(feat.dim());
  Tensor<T> x({1, dim, len});
  for (int64_t t = 0; t < len; ++t) {
    for (int64_t d = 0; d < dim; ++d) x[d * len + t] = static_cast<T>(feat(t, d));
  }
  return x;
}

template class ResBlock2d<float>;
template class ResBlock2d<double>;
template class SvModel<float>;
template class SvModel<double>;
template SvModel<double> SvModel<float>::Cast<double>() const;
template SvModel<float> SvModel<double>::Cast<float>() const;
template Tensor<float> FeaturesToMap(const FeatureMatrix&);
template Tensor<double> FeaturesToMap(const FeatureMatrix&);

// --------------------------------------------------------------- scoring --

namespace {

double Norm(const std::vector<float>& v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

}  // namespace

Embedding EmbedUtterance(const SvModel<float>& model, const FeatureMatrix& feat) {
  if (feat.num_frames() < 1) throw ValidationError("sv: utterance has no frames");
  if (static_cast<int>(feat.dim()) != model.config().input_dim) {
    throw ValidationError("sv: feature dimension " + std::to_string(feat.dim()) +
                          " != input_dim " + std::to_string(model.config().input_dim));
  }
  const Tensor<float> raw = model.Infer(FeaturesToMap<float>(feat));
  const Tensor<float> unit = L2NormalizeForward(raw, 1e-12);
  Embedding e;
  e.vector.assign(unit.vec().begin(), unit.vec().end());
  e.normalized = true;
  return e;
}

EnrollmentProfile Enroll(const std::string& speaker_id, const std::vector<Embedding>& embeddings) {
  PVT_CHECK(!embeddings.empty(), "enroll: no embeddings for speaker " + speaker_id);
  const std::size_t dim = embeddings[0].vector.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& e : embeddings) {
    PVT_CHECK(e.vector.size() == dim, "enroll: embedding dimensions differ");
    const double n = Norm(e.vector);
    PVT_CHECK(n > 0.0, "enroll: zero embedding for speaker " + speaker_id);
    for (std::size_t i = 0; i < dim; ++i) mean[i] += e.vector[i] / n;
  }
  double norm = 0.0;
  for (double& m : mean) {
    m /= static_cast<double>(embeddings.size());
    norm += m * m;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-6) {
    throw ValidationError("enroll: embeddings of speaker " + speaker_id +
                          " cancel out; the profile is undefined");
  }
  EnrollmentProfile p;
  p.speaker_id = speaker_id;
  p.vector.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) p.vector[i] = static_cast<float>(mean[i] / norm);
  return p;
}

double CosineScore(const std::vector<float>& a, const std::vector<float>& b) {
  PVT_CHECK(a.size() == b.size(), "cosine: dimension mismatch");
  const double na = Norm(a), nb = Norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double CosineScore(const EnrollmentProfile& profile, const Embedding& test) {
  return CosineScore(profile.vector, test.vector);
}

double FuseScores(double a, double b) { return 0.5 * (a + b); }

}  // namespace pvt
