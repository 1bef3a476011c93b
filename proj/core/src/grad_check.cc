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

#include "pvt/grad_check.h"

#include <algorithm>
#include <cmath>

namespace pvt {

double RelativeError(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport GradCheck(const std::function<double()>& loss,
                          const std::vector<GradCheckTarget>& targets,
                          const GradCheckOptions& options) {
  GradCheckReport report;
  ReluPatternScope scope;
  loss();
  const uint64_t base_pattern = scope.hash();
  for (const auto& target : targets) {
    if (target.analytic->shape() != target.value->shape()) {
      throw ValidationError("grad_check: analytic gradient shape mismatch for " +
                            target.name);
    }
    for (std::size_t i = 0; i < target.value->size(); ++i) {
      double& x = (*target.value)[i];
      const double saved = x;
      x = saved + options.eps;
      scope.Reset();
      const double f_plus = loss();
      const uint64_t plus_pattern = scope.hash();
      x = saved - options.eps;
      scope.Reset();
      const double f_minus = loss();
      const uint64_t minus_pattern = scope.hash();
      x = saved;
      if (options.skip_relu_kinks &&
          (plus_pattern != base_pattern || minus_pattern != base_pattern)) {
        ++report.skipped;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * options.eps);
      const double err = RelativeError((*target.analytic)[i], numeric, options.abs_floor);
      ++report.checked;
      if (err > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        if (err >= report.max_rel_error) {
          report.worst_target = target.name;
          report.worst_index = static_cast<int64_t>(i);
        }
      }
    }
  }
  return report;
}

}  // namespace pvt
