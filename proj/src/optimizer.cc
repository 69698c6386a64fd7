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

#include "ncis/optimizer.h"

#include <cmath>

#include "ncis/errors.h"

namespace ncis {

AdamOptimizer::AdamOptimizer(const ParameterSet& params, AdamOptions options)
    : options_(options) {
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamOptimizer::step(ParameterSet& params, const ad::Gradient& gradient) {
  if (gradient.size() != params.size() || params.size() != m_.size()) {
    throw ContractError("AdamOptimizer::step: gradient/parameter mismatch");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& values = params[b].values;
    const auto& g = gradient[b];
    if (g.size() != values.size()) {
      throw ContractError("AdamOptimizer::step: block '" + params[b].name +
                          "' has mismatched gradient size");
    }
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

}  // namespace ncis
