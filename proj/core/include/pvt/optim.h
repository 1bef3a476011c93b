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

#ifndef PVT_OPTIM_H_
#define PVT_OPTIM_H_

#include <cstdint>
#include <map>
#include <string>

#include "pvt/tensor.h"

namespace pvt {

enum class OptimizerKind { kNone, kAdam, kSgd };

// Hyperparameters plus per-parameter moments keyed by parameter name.
// Default-constructed state is uninitialized; use MakeAdam / MakeSgd.
template <typename T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kNone;
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.0;
  double weight_decay = 0.0;
  int64_t step = 0;
  std::map<std::string, Tensor<T>> first_moment;   // Adam m / SGD momentum buffer
  std::map<std::string, Tensor<T>> second_moment;  // Adam v
};

template <typename T>
OptimizerState<T> MakeAdam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

template <typename T>
OptimizerState<T> MakeSgd(double lr, double momentum = 0.9,
                          double weight_decay = 0.0);

// Adam with bias correction.
template <typename T>
void AdamStep(const ParamStore<T>& params, OptimizerState<T>* state);

// w <- w - lr * buf,  buf <- momentum * buf + (g + wd * w).
template <typename T>
void SgdStep(const ParamStore<T>& params, OptimizerState<T>* state);

template <typename T>
void OptimizerStep(const ParamStore<T>& params, OptimizerState<T>* state);

// Rescales all gradients so that their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double ClipGradNorm(const ParamStore<T>& params, double max_norm);

}  // namespace pvt

#endif  // PVT_OPTIM_H_
