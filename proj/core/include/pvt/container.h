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

#ifndef PVT_CONTAINER_H_
#define PVT_CONTAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pvt/optim.h"
#include "pvt/tensor.h"

namespace pvt {

// Binary tensor file:
//   "PVTK1" | u32 version | u64 metadata length | metadata JSON | padding
//   | payload
// All integers little endian. The metadata lists {name, shape, dtype, offset,
// nbytes} per tensor plus free-form string attributes; offsets are relative
// to the payload start, which is 8-byte aligned, as is every tensor. Tensors
// are stored as little-endian IEEE-754 f32.
inline constexpr char kContainerMagic[] = "PVTK1";
inline constexpr uint32_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct TensorContainer {
  std::vector<NamedTensor> tensors;
  std::map<std::string, std::string> attrs;

  const NamedTensor* Find(const std::string& name) const;
  void Add(std::string name, Shape shape, std::vector<float> data);
};

std::vector<char> SerializeContainer(const TensorContainer& c);
// Throws FormatError on bad magic, unsupported version or inconsistent
// offsets, never reads out of bounds.
TensorContainer ParseContainer(const std::vector<char>& bytes);

void WriteContainer(const std::string& path, const TensorContainer& c);
TensorContainer ReadContainer(const std::string& path);

// 64-bit FNV-1a of a canonical config string, as 16 hex digits.
std::string ConfigHash(const std::string& canonical_config);

// Checkpoint = container with every param and buffer of the store, the
// optional optimizer moments ("optim.m.<name>", "optim.v.<name>"), and the
// attributes kind, config (canonical JSON) and config_hash.
template <typename T>
TensorContainer MakeCheckpoint(const ParamStore<T>& params, const OptimizerState<T>* opt,
                               const std::string& kind, const std::string& config_json);

template <typename T>
void SaveCheckpoint(const std::string& path, const ParamStore<T>& params,
                    const OptimizerState<T>* opt, const std::string& kind,
                    const std::string& config_json);

// Restores every param and buffer of the store. The stored config hash must
// equal ConfigHash(expected_config_json) unless that is empty. Missing
// tensors and shape mismatches are errors; unknown tensors are logged and
// ignored. opt may be null.
template <typename T>
void RestoreCheckpoint(const TensorContainer& c, const ParamStore<T>& params,
                       OptimizerState<T>* opt, const std::string& expected_config_json);

template <typename T>
void LoadCheckpoint(const std::string& path, const ParamStore<T>& params,
                    OptimizerState<T>* opt, const std::string& expected_config_json);

}  // namespace pvt

#endif  // PVT_CONTAINER_H_
