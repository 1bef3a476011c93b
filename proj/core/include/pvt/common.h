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

#ifndef PVT_COMMON_H_
#define PVT_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pvt {

// Input or configuration that violates a documented precondition. The CLI
// maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while doing otherwise valid work (I/O, non-finite loss, ...). The
// CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

// Malformed WAV header or unsupported sample format.
class WavFormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed or incompatible tensor container / checkpoint.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

using Rng = std::mt19937_64;

inline constexpr int kSampleRate = 16000;
inline constexpr int kHopSamples = 160;  // 10 ms at 16 kHz

}  // namespace pvt

#define PVT_CHECK(cond, msg)                                            \
  do {                                                                  \
    if (!(cond)) throw ::pvt::ValidationError(std::string(msg));        \
  } while (0)

#endif  // PVT_COMMON_H_
