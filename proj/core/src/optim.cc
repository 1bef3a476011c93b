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

#include "pvt/optim.h"

#include <cmath>

namespace pvt {

namespace {

template <typename T>
Tensor<T>& Moment(std::map<std::string, Tensor<T>>* moments,
                  const std::string& name, const Shape& shape) {
  auto it = moments->find(name);
  if (it == moments->end()) {
    it = moments->emplace(name, Tensor<T>(shape)).first;
  } else if (it->second.shape() != shape) {
    throw ValidationError("optimizer moment shape mismatch for " + name);
  }
  return it->second;
}

}  // namespace

template <typename T>
OptimizerState<T> MakeAdam(double lr, double beta1, double beta2, double eps) {
  OptimizerState<T> s;
  s.kind = OptimizerKind::kAdam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

template <typename T>
OptimizerState<T> MakeSgd(double lr, double momentum, double weight_decay) {
  OptimizerState<T> s;
  s.kind = OptimizerKind::kSgd;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

template <typename T>
void AdamStep(const ParamStore<T>& params, OptimizerState<T>* state) {
  if (state->kind != OptimizerKind::kAdam) {
    throw ValidationError("adam_step: optimizer state is not initialized for Adam");
  }
  ++state->step;
  const double bc1 = 1.0 - std::pow(state->beta1, static_cast<double>(state->step));
  const double bc2 = 1.0 - std::pow(state->beta2, static_cast<double>(state->step));
  for (const auto& e : params.params()) {
    Tensor<T>& m = Moment(&state->first_moment, e.name, e.param->value.shape());
    Tensor<T>& v = Moment(&state->second_moment, e.name, e.param->value.shape());
    Tensor<T>& w = e.param->value;
    const Tensor<T>& g = e.param->grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + state->weight_decay * w[i];
      const double mi = state->beta1 * m[i] + (1.0 - state->beta1) * gi;
      const double vi = state->beta2 * v[i] + (1.0 - state->beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      w[i] = static_cast<T>(w[i] - state->lr * mhat / (std::sqrt(vhat) + state->eps));
    }
  }
}

template <typename T>
void SgdStep(const ParamStore<T>& params, OptimizerState<T>* state) {
  if (state->kind != OptimizerKind::kSgd) {
    throw ValidationError("sgd_step: optimizer state is not initialized for SGD");
  }
  ++state->step;
  for (const auto& e : params.params()) {
    Tensor<T>& w = e.param->value;
    const Tensor<T>& g = e.param->grad;
    if (state->momentum > 0.0) {
      Tensor<T>& buf = Moment(&state->first_moment, e.name, w.shape());
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = g[i] + state->weight_decay * w[i];
        buf[i] = static_cast<T>(state->momentum * buf[i] + d);
        w[i] = static_cast<T>(w[i] - state->lr * buf[i]);
      }
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = g[i] + state->weight_decay * w[i];
        w[i] = static_cast<T>(w[i] - state->lr * d);
      }
    }
  }
}

template <typename T>
void OptimizerStep(const ParamStore<T>& params, OptimizerState<T>* state) {
  switch (state->kind) {
    case OptimizerKind::kAdam:
      AdamStep(params, state);
      return;
    case OptimizerKind::kSgd:
      SgdStep(params, state);
      return;
    case OptimizerKind::kNone:
      break;
  }
  throw ValidationError("optimizer step on uninitialized optimizer state");
}

template <typename T>
double ClipGradNorm(const ParamStore<T>& params, double max_norm) {
  const double norm = std::sqrt(params.GradNormSquared());
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& e : params.params()) {
      for (auto& g : e.param->grad.vec()) g *= scale;
    }
  }
  return norm;
}

template OptimizerState<float> MakeAdam(double, double, double, double);
template OptimizerState<double> MakeAdam(double, double, double, double);
template OptimizerState<float> MakeSgd(double, double, double);
template OptimizerState<double> MakeSgd(double, double, double);
template void AdamStep(const ParamStore<float>&, OptimizerState<float>*);
template void AdamStep(const ParamStore<double>&, OptimizerState<double>*);
template void SgdStep(const ParamStore<float>&, OptimizerState<float>*);
template void SgdStep(const ParamStore<double>&, OptimizerState<double>*);
template void OptimizerStep(const ParamStore<float>&, OptimizerState<float>*);
template void OptimizerStep(const ParamStore<double>&, OptimizerState<double>*);
template double ClipGradNorm(const ParamStore<float>&, double);
template double ClipGradNorm(const ParamStore<double>&, double);

}  // namespace pvt
