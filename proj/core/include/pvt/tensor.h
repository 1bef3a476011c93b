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
#ifndef PVT_TENSOR_H_
#define PVT_TENSOR_H_

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pvt/common.h"

namespace pvt {

using Shape = std::vector<int64_t>;

std::string ShapeString(const Shape& shape);
int64_t ShapeSize(const Shape& shape);

// Dense row-major tensor. T is float for training/inference and double for
// gradient checking.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(ShapeSize(shape_)), fill) {}
  Tensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void Reshape(Shape shape);
  bool AllFinite() const;

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// A trainable tensor plus its gradient accumulator (same shape).
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(Shape shape) : value(shape), grad(std::move(shape)) {}
  void ZeroGrad() { grad.Fill(T(0)); }
};

// Non-owning registry of a model's named parameters and non-trainable
// buffers (batch-norm running statistics). Entries point into the model that
// produced the store, so a store must not outlive or be copied across models.
template <typename T>
class ParamStore {
 public:
  struct ParamEntry {
    std::string name;
    Param<T>* param;
  };
  struct BufferEntry {
    std::string name;
    Tensor<T>* buffer;
  };

  void AddParam(const std::string& name, Param<T>* param);
  void AddBuffer(const std::string& name, Tensor<T>* buffer);

  const std::vector<ParamEntry>& params() const { return params_; }
  const std::vector<BufferEntry>& buffers() const { return buffers_; }

  Param<T>* FindParam(const std::string& name) const;
  Tensor<T>* FindBuffer(const std::string& name) const;

  void ZeroGrad();
  // Total element count over parameters; buffers excluded.
  int64_t NumParams() const;
  // Sum of squared gradient entries over all params.
  double GradNormSquared() const;

  // Returns a sub-store with params whose name satisfies pred.
  ParamStore Filter(const std::function<bool(const std::string&)>& pred) const;

 private:
  std::vector<ParamEntry> params_;
  std::vector<BufferEntry> buffers_;
};

// Copies values of every param and buffer present in both stores by name.
// Throws ValidationError on a shape mismatch.
template <typename From, typename To>
void CopyParams(const ParamStore<From>& from, const ParamStore<To>& to);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace pvt

#endif  // PVT_TENSOR_H_
