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

#include "pvt/sv_loss.h"

#include <algorithm>
#include <cmath>

#include "pvt/layers.h"

namespace pvt {

namespace {

constexpr double kNormEps = 1e-12;

template <typename T>
void RequireMatrix(const char* what, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(0) < 1 || x.dim(1) < 1) {
    throw ValidationError(std::string(what) + ": expected a non-empty [N, E] matrix, got " +
                          ShapeString(x.shape()));
  }
}

}  // namespace

template <typename T>
ArcFaceResult<T> ArcFaceLoss(const Tensor<T>& emb, const std::vector<int>& labels,
                             const Tensor<T>& weights, double scale, double margin) {
  RequireMatrix("arcface embeddings", emb);
  RequireMatrix("arcface class weights", weights);
  const int64_t n = emb.dim(0), e_dim = emb.dim(1), classes = weights.dim(0);
  PVT_CHECK(weights.dim(1) == e_dim, "arcface: embedding and class weight widths differ");
  PVT_CHECK(static_cast<int64_t>(labels.size()) == n, "arcface: one label per embedding");
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ValidationError("arcface: label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(classes) + ")");
    }
  }
  const Tensor<T> e_hat = L2NormalizeForward(emb, kNormEps);
  const Tensor<T> w_hat = L2NormalizeForward(weights, kNormEps);
  const double cos_m = std::cos(margin), sin_m = std::sin(margin);
  // Beyond theta = pi - m the margin logit is held at cos(pi) = -1.
  const double clamp_cos = -cos_m;

  ArcFaceResult<T> r;
  Tensor<T> d_e_hat({n, e_dim});
  Tensor<T> d_w_hat({classes, e_dim});
  std::vector<double> cosines(classes), logits(classes), dlogit_dcos(classes);
  for (int64_t i = 0; i < n; ++i) {
    const T* ei = e_hat.data() + i * e_dim;
    const int y = labels[i];
    int64_t best = 0;
    for (int64_t j = 0; j < classes; ++j) {
      const T* wj = w_hat.data() + j * e_dim;
      double c = 0.0;
      for (int64_t k = 0; k < e_dim; ++k) c += static_cast<double>(ei[k]) * wj[k];
      c = std::clamp(c, -1.0, 1.0);
      cosines[j] = c;
      if (c > cosines[best]) best = j;
      logits[j] = scale * c;
      dlogit_dcos[j] = scale;
    }
    if (best == y) ++r.correct;
    const double c = cosines[y];
    if (c < clamp_cos) {
      logits[y] = -scale;
      dlogit_dcos[y] = 0.0;
    } else {
      const double s = std::sqrt(std::max(1.0 - c * c, 0.0));
      logits[y] = scale * (c * cos_m - s * sin_m);
      dlogit_dcos[y] = margin == 0.0 ? scale : scale * (cos_m + sin_m * c / std::max(s, 1e-12));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - mx);
    const double lse = mx + std::log(denom);
    r.loss += lse - logits[y];
    for (int64_t j = 0; j < classes; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double g = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n) * dlogit_dcos[j];
      if (g == 0.0) continue;
      const T* wj = w_hat.data() + j * e_dim;
      T* dwj = d_w_hat.data() + j * e_dim;
      T* dei = d_e_hat.data() + i * e_dim;
      for (int64_t k = 0; k < e_dim; ++k) {
        dei[k] += static_cast<T>(g * wj[k]);
        dwj[k] += static_cast<T>(g * ei[k]);
      }
    }
  }
  r.loss /= static_cast<double>(n);
  r.d_emb = L2NormalizeBackward(emb, e_hat, d_e_hat, kNormEps);
  r.d_weights = L2NormalizeBackward(weights, w_hat, d_w_hat, kNormEps);
  return r;
}

template <typename T>
SupConResult<T> SupConLoss(const Tensor<T>& emb, const std::vector<int>& labels,
                           double temperature) {
  RequireMatrix("supcon embeddings", emb);
  PVT_CHECK(temperature > 0.0, "supcon: temperature must be > 0");
  const int64_t n = emb.dim(0), e_dim = emb.dim(1);
  PVT_CHECK(static_cast<int64_t>(labels.size()) == n, "supcon: one label per embedding");
  PVT_CHECK(n >= 2, "supcon: batch size must be >= 2");
  const Tensor<T> z = L2NormalizeForward(emb, kNormEps);

  std::vector<double> sim(static_cast<std::size_t>(n * n));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t a = 0; a < n; ++a) {
      double dot = 0.0;
      for (int64_t k = 0; k < e_dim; ++k) {
        dot += static_cast<double>(z[i * e_dim + k]) * z[a * e_dim + k];
      }
      sim[i * n + a] = dot / temperature;
    }
  }
  std::vector<int> n_pos(n, 0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t a = 0; a < n; ++a) {
      if (a != i && labels[a] == labels[i]) ++n_pos[i];
    }
  }
  SupConResult<T> r;
  for (int64_t i = 0; i < n; ++i) r.anchors += n_pos[i] > 0 ? 1 : 0;
  if (r.anchors == 0) throw ValidationError("supcon: no anchor in the batch has a positive");

  std::vector<double> d_sim(static_cast<std::size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    if (n_pos[i] == 0) continue;
    double mx = -INFINITY;
    for (int64_t a = 0; a < n; ++a) {
      if (a != i) mx = std::max(mx, sim[i * n + a]);
    }
    double denom = 0.0;
    for (int64_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim[i * n + a] - mx);
    }
    const double lse = mx + std::log(denom);
    double pos_sum = 0.0;
    for (int64_t a = 0; a < n; ++a) {
      if (a != i && labels[a] == labels[i]) pos_sum += sim[i * n + a];
    }
    r.loss += lse - pos_sum / n_pos[i];
    for (int64_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const double p = std::exp(sim[i * n + a] - lse);
      const double pos = labels[a] == labels[i] ? 1.0 / n_pos[i] : 0.0;
      d_sim[i * n + a] = (p - pos) / r.anchors;
    }
  }
  r.loss /= r.anchors;

  Tensor<T> dz({n, e_dim});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t a = 0; a < n; ++a) {
      const double g = d_sim[i * n + a] / temperature;
      if (g == 0.0) continue;
      for (int64_t k = 0; k < e_dim; ++k) {
        dz[i * e_dim + k] += static_cast<T>(g * z[a * e_dim + k]);
        dz[a * e_dim + k] += static_cast<T>(g * z[i * e_dim + k]);
      }
    }
  }
  r.d_emb = L2NormalizeBackward(emb, z, dz, kNormEps);
  return r;
}

double SvTotalLoss(double arcface, double supcon, double lambda) {
  PVT_CHECK(lambda >= 0.0, "sv loss: lambda must be >= 0");
  return arcface + lambda * supcon;
}

template ArcFaceResult<float> ArcFaceLoss(const Tensor<float>&, const std::vector<int>&,
                                          const Tensor<float>&, double, double);
template ArcFaceResult<double> ArcFaceLoss(const Tensor<double>&, const std::vector<int>&,
                                           const Tensor<double>&, double, double);
template SupConResult<float> SupConLoss(const Tensor<float>&, const std::vector<int>&, double);
template SupConResult<double> SupConLoss(const Tensor<double>&, const std::vector<int>&, double);

}  // namespace pvt
