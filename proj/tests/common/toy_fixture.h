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

#ifndef NCIS_TESTS_TOY_FIXTURE_H_
#define NCIS_TESTS_TOY_FIXTURE_H_

// Shared trained models on the three-arc toy benchmark. Each binary trains
// them once on first use.

#include <cstddef>
#include <cstdint>

#include "ncis/cvpn.h"
#include "ncis/density.h"
#include "ncis/evalharness.h"
#include "ncis/invariant_training.h"

namespace ncis::testing {

inline constexpr std::size_t kToyIterations = 2000;

inline const ToyBenchmark& toy_benchmark() {
  static const ToyBenchmark bench = make_toy_benchmark(0, 200);
  return bench;
}

inline CvpnModel untrained_toy_model() {
  CvpnConfig cfg;
  cfg.dim = 2;
  cfg.num_invariants = 1;
  cfg.num_blocks = 4;
  cfg.class_count = 3;
  cfg.hidden_width = 32;
  cfg.seed = 0;
  return CvpnModel::build(cfg);
}

inline const CvpnModel& trained_toy_model() {
  static const CvpnModel model = [] {
    TrainConfig tc;
    tc.iterations = kToyIterations;
    return train_cvpn(untrained_toy_model(), toy_benchmark().train, tc).model;
  }();
  return model;
}

inline const ClassGaussianBank& trained_toy_bank() {
  static const ClassGaussianBank bank =
      fit_class_gaussians(trained_toy_model(), toy_benchmark().train, kDefaultLambda);
  return bank;
}

}  // namespace ncis::testing

#endif  // NCIS_TESTS_TOY_FIXTURE_H_
