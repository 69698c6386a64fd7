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

#ifndef NCIS_OUTLIER_SAMPLING_H_
#define NCIS_OUTLIER_SAMPLING_H_

// Boundary outlier synthesis: draw v' from the lambda-inflated class Gaussian,
// keep it only when its log-density falls below the class threshold
// tau_l (the q-quantile of the class's training log-densities), then map it
// back to embedding space with the inverse cVPN.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ncis/cvpn.h"
#include "ncis/density.h"
#include "ncis/random.h"

namespace ncis {

inline constexpr double kDefaultAcceptanceQuantile = 0.05;

struct InvariantSample {
  std::vector<double> v;
  double log_density = 0.0;
  std::size_t attempts = 0;  // draws consumed, including the accepted one
};

// Accepts the first draw with log_density < threshold. Throws SamplingError
// after max_attempts rejected draws.
InvariantSample rejection_sample_below(const ClassGaussianBank& bank,
                                       std::size_t label, double threshold,
                                       std::size_t max_attempts, Rng& rng);

// Threshold from the q-quantile rule; q must lie in (0, 1).
InvariantSample rejection_sample_invariant(const ClassGaussianBank& bank,
                                           std::size_t label, double q,
                                           std::size_t max_attempts, Rng& rng);

// e' = f^-1(v'; l).
std::vector<double> outlier_embedding(const CvpnModel& model,
                                      std::span<const double> v,
                                      std::size_t label);

struct OutlierSet {
  std::size_t dim = 0;
  std::vector<std::vector<double>> embeddings;
  std::vector<std::size_t> labels;
  std::vector<double> log_densities;  // invariant-space log-density at acceptance
  double lambda = 0.0;
  double quantile = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> attempts_per_class;

  std::size_t size() const { return embeddings.size(); }
  bool empty() const { return embeddings.empty(); }
};

// 10 * n_per_class / q, rounded up.
std::size_t default_max_attempts(std::size_t n_per_class, double q);

// Exactly n_per_class outliers per class. Class l draws from its own stream
// derive_seed(seed, l). `max_attempts` is a per-class budget; 0 selects
// default_max_attempts().
OutlierSet synthesize_outliers(const CvpnModel& model,
                               const ClassGaussianBank& bank,
                               std::size_t n_per_class, double q,
                               std::size_t max_attempts, std::uint64_t seed);

// Mean ||g(e', l)|| over the set.
double mean_invariant_magnitude(const CvpnModel& model, const OutlierSet& set);

// "class,e0,...,log_density,lambda,q".
std::string write_outlier_csv(const OutlierSet& set);
OutlierSet read_outlier_csv(const std::string& csv);

}  // namespace ncis

#endif  // NCIS_OUTLIER_SAMPLING_H_
