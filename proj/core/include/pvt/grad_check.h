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

#ifndef PVT_GRAD_CHECK_H_
#define PVT_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pvt/tensor.h"

namespace pvt {

namespace detail {
// When non-null, Relu() folds the sign pattern of its input into this hash.
extern thread_local uint64_t* relu_pattern_hash;
}  // namespace detail

// Records the ReLU on/off pattern of every forward pass run while in scope.
class ReluPatternScope {
 public:
  ReluPatternScope() : previous_(detail::relu_pattern_hash) {
    detail::relu_pattern_hash = &hash_;
  }
  ~ReluPatternScope() { detail::relu_pattern_hash = previous_; }
  ReluPatternScope(const ReluPatternScope&) = delete;
  ReluPatternScope& operator=(const ReluPatternScope&) = delete;

  void Reset() { hash_ = 1469598103934665603ULL; }
  uint64_t hash() const { return hash_; }

 private:
  uint64_t hash_ = 1469598103934665603ULL;
  uint64_t* previous_;
};

struct GradCheckTarget {
  std::string name;
  Tensor<double>* value;            // perturbed in place, restored afterwards
  const Tensor<double>* analytic;   // d loss / d value
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Skip coordinates whose +/- eps probes flip any ReLU (the central
  // difference is invalid across a kink).
  bool skip_relu_kinks = true;
  // Denominator floor of the relative error. A gradient that is zero in exact
  // arithmetic (a bias feeding a train-mode batch norm) leaves only rounding
  // noise, around 1e-11, in the central difference.
  double abs_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_target;
  int64_t worst_index = -1;
  int64_t checked = 0;
  int64_t skipped = 0;
};

// |a - n| / max(|a|, |n|, floor).
double RelativeError(double analytic, double numeric, double floor = 1e-6);

// Central finite differences of `loss` against the analytic gradients, over
// every coordinate of every target.
GradCheckReport GradCheck(const std::function<double()>& loss,
                          const std::vector<GradCheckTarget>& targets,
                          const GradCheckOptions& options = {});

}  // namespace pvt

#endif  // PVT_GRAD_CHECK_H_
