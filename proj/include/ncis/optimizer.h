// Copyright 2026 The NCIS Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NCIS_OPTIMIZER_H_
#define NCIS_OPTIMIZER_H_

#include <vector>

#include "ncis/autodiff.h"
#include "ncis/parameters.h"

namespace ncis {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation over a ParameterSet.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterSet& params, AdamOptions options);

  // Applies one update. A coordinate whose gradient has always been zero
  // does not move.
  void step(ParameterSet& params, const ad::Gradient& gradient);
  long steps() const { return step_; }

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_ = 0;
};

}  // namespace ncis

#endif  // NCIS_OPTIMIZER_H_
