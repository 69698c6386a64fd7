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

#ifndef NCIS_INVARIANT_TRAINING_H_
#define NCIS_INVARIANT_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ncis/autodiff.h"
#include "ncis/cvpn.h"
#include "ncis/dataset.h"

namespace ncis {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t iterations = 5000;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  double variance_percent = 2.0;  // p
  std::size_t num_blocks = 4;
  std::size_t hidden_width = 32;

  void validate() const;
};

struct InvariantCountSelection {
  std::size_t k = 1;
  std::vector<std::size_t> per_class;  // K_l before averaging
  std::vector<std::string> warnings;
};

// Per class: K_l is the largest m such that the m smallest covariance
// eigenvalues hold less than p% of the total variance. K is the mean of K_l
// rounded half-up, clamped to [1, D-1]. A class with zero total variance
// gets K_l = D-1 and a warning.
InvariantCountSelection select_num_invariants(const LabeledEmbeddingSet& data,
                                              double percent);

// Mean over the batch of ||g(e_i, l_i)||^2. Throws on an empty batch.
double invariant_loss(const CvpnModel& model, const LabeledEmbeddingSet& batch);

// The same quantity on a tape, for the given rows of `data`.
ad::Var invariant_loss(ad::Tape& tape, const CvpnModel& model,
                       const CvpnTapeBinding& binding,
                       const LabeledEmbeddingSet& data,
                       std::span<const std::size_t> rows);

// Loss value and parameter gradient (in parameters() order) on the given rows.
ad::ValueAndGradient invariant_loss_and_grad(const CvpnModel& model,
                                             const LabeledEmbeddingSet& data,
                                             std::span<const std::size_t> rows);

struct TrainResult {
  CvpnModel model;
  std::vector<double> loss_history;  // batch loss before each update
};

// Minimizes the mean invariant loss with Adam. Only the training split of
// `data` is used. Throws NumericError naming the iteration on a NaN loss.
TrainResult train_cvpn(CvpnModel model, const LabeledEmbeddingSet& data,
                       const TrainConfig& config);

// "iteration,loss" CSV.
std::string loss_history_csv(const std::vector<double>& history);

}  // namespace ncis

#endif  // NCIS_INVARIANT_TRAINING_H_
