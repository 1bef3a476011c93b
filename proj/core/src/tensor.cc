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
#include "pvt/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace pvt {

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int64_t ShapeSize(const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ValidationError("negative dimension in " + ShapeString(shape));
    n *= d;
  }
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (ShapeSize(shape_) != static_cast<int64_t>(data_.size())) {
    throw ValidationError("tensor shape " + ShapeString(shape_) +
                          " does not match data length " +
                          std::to_string(data_.size()));
  }
}

template <typename T>
void Tensor<T>::Reshape(Shape shape) {
  if (ShapeSize(shape) != static_cast<int64_t>(data_.size())) {
    throw ValidationError("cannot reshape " + ShapeString(shape_) + " to " +
                          ShapeString(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
bool Tensor<T>::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
void ParamStore<T>::AddParam(const std::string& name, Param<T>* param) {
  if (FindParam(name) || FindBuffer(name)) {
    throw ValidationError("duplicate parameter name: " + name);
  }
  if (param->grad.shape() != param->value.shape()) {
    param->grad = Tensor<T>(param->value.shape());
  }
  params_.push_back({name, param});
}

template <typename T>
void ParamStore<T>::AddBuffer(const std::string& name, Tensor<T>* buffer) {
  if (FindParam(name) || FindBuffer(name)) {
    throw ValidationError("duplicate buffer name: " + name);
  }
  buffers_.push_back({name, buffer});
}

template <typename T>
Param<T>* ParamStore<T>::FindParam(const std::string& name) const {
  for (const auto& e : params_) {
    if (e.name == name) return e.param;
  }
  return nullptr;
}

template <typename T>
Tensor<T>* ParamStore<T>::FindBuffer(const std::string& name) const {
  for (const auto& e : buffers_) {
    if (e.name == name) return e.buffer;
  }
  return nullptr;
}

template <typename T>
void ParamStore<T>::ZeroGrad() {
  for (auto& e : params_) e.param->ZeroGrad();
}

template <typename T>
int64_t ParamStore<T>::NumParams() const {
  int64_t n = 0;
  for (const auto& e : params_) n += static_cast<int64_t>(e.param->value.size());
  return n;
}

template <typename T>
double ParamStore<T>::GradNormSquared() const {
  double s = 0.0;
  for (const auto& e : params_) {
    for (T g : e.param->grad.vec()) s += static_cast<double>(g) * g;
  }
  return s;
}

template <typename T>
ParamStore<T> ParamStore<T>::Filter(
    const std::function<bool(const std::string&)>& pred) const {
  ParamStore out;
  for (const auto& e : params_) {
    if (pred(e.name)) out.params_.push_back(e);
  }
  return out;
}

template <typename From, typename To>
void CopyParams(const ParamStore<From>& from, const ParamStore<To>& to) {
  for (const auto& e : to.params()) {
    const Param<From>* src = from.FindParam(e.name);
    if (!src) continue;
    if (src->value.shape() != e.param->value.shape()) {
      throw ValidationError("shape mismatch for " + e.name);
    }
    e.param->value = src->value.template Cast<To>();
  }
  for (const auto& e : to.buffers()) {
    const Tensor<From>* src = from.FindBuffer(e.name);
    if (!src) continue;
    if (src->shape() != e.buffer->shape()) {
      throw ValidationError("shape mismatch for " + e.name);
    }
    *e.buffer = src->template Cast<To>();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template void CopyParams(const ParamStore<float>&, const ParamStore<double>&);
template void CopyParams(const ParamStore<double>&, const ParamStore<float>&);
template void CopyParams(const ParamStore<float>&, const ParamStore<float>&);
template void CopyParams(const ParamStore<double>&, const ParamStore<double>&);

}  // namespace pvt
