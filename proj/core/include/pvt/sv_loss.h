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

#ifndef PVT_SV_LOSS_H_
#define PVT_SV_LOSS_H_

#include <vector>

#include "pvt/tensor.h"

namespace pvt {

template <typename T>
struct ArcFaceResult {
  double loss = 0.0;      // mean cross-entropy over the batch
  int correct = 0;        // argmax of the plain cosines equals the label
  Tensor<T> d_emb;        // [N, E], w.r.t. the raw embeddings
  Tensor<T> d_weights;    // [C, E], w.r.t. the raw class weights
};

// Cross-entropy over logits s * cos(theta_j + m [j = y]) with
// cos(theta_j) = <e/|e|, w_j/|w_j|> and theta_y clamped to [0, pi - m].
template <typename T>
ArcFaceResult<T> ArcFaceLoss(const Tensor<T>& emb, const std::vector<int>& labels,
                             const Tensor<T>& weights, double scale, double margin);

template <typename T>
struct SupConResult {
  double loss = 0.0;  // mean over anchors with at least one positive
  int anchors = 0;
  Tensor<T> d_emb;    // [N, E], w.r.t. the raw embeddings
};

// Supervised contrastive loss with the sum over positives outside the log:
//   L_i = -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
// on L2-normalized z. Anchors without a positive are skipped; a batch with
// no anchor at all is a ValidationError.
template <typename T>
SupConResult<T> SupConLoss(const Tensor<T>& emb, const std::vector<int>& labels,
                           double temperature);

// arcface + lambda * supcon.
double SvTotalLoss(double arcface, double supcon, double lambda);

}  // namespace pvt

#endif  // PVT_SV_LOSS_H_
