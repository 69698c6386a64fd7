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

#ifndef NCIS_EMBEDDING_H_
#define NCIS_EMBEDDING_H_

// MAP embedding of a sample in a denoiser's conditioning space.
//
// Starting from the class token embedding e_l, each iteration draws a batch
// of (t, eps) pairs, evaluates the noise-prediction loss
//
//   L(e) = mean_b || eps_b - eps_theta(x_t_b, t_b, e) ||^2,
//   x_t = sqrt(abar_t) x + sqrt(1 - abar_t) eps,
//
// and takes one plain gradient step e <- e - lr * dL/de. Staying near e_l is
// enforced only through the initialization and the small iteration budget.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ncis/autodiff.h"
#include "ncis/dataset.h"

namespace ncis {

class NoiseSchedule {
 public:
  // Linear beta schedule over T steps; the default endpoints are the usual
  // 1e-4..0.02 rescaled by 1000/T so that abar_T stays small for short T,
  // capped at 0.5.
  static NoiseSchedule linear(std::size_t steps = 50);
  static NoiseSchedule linear(std::size_t steps, double beta_start,
                              double beta_end);

  // abar_1..abar_T; must lie in (0, 1] and be strictly decreasing.
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  std::size_t steps() const { return alpha_bar_.size(); }
  // t in [1, T].
  double alpha_bar(std::size_t t) const;

 private:
  std::vector<double> alpha_bar_;
};

// sqrt(abar) x0 + sqrt(1 - abar) eps, for abar in [0, 1].
std::vector<double> forward_noise(std::span<const double> x0, double alpha_bar,
                                  std::span<const double> eps);
// Throws ContractError when t is outside [1, T].
std::vector<double> forward_noise(std::span<const double> x0, std::size_t t,
                                  std::span<const double> eps,
                                  const NoiseSchedule& schedule);

// eps_theta(x_t, t, e). Implementations must build their output from tape
// primitives so that it is differentiable with respect to e.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::size_t sample_dim() const = 0;
  virtual std::size_t embed_dim() const = 0;
  virtual ad::Var predict_noise(ad::Tape& tape, ad::Var x_t, std::size_t t,
                                ad::Var e) const = 0;
};

// eps_theta(x_t, t, e) = x_t - A e. The expected loss is quadratic in e with
// minimizer A^-1 * mean_t(sqrt(abar_t)) * x0 when A is square and invertible.
class LinearToyDenoiser : public Denoiser {
 public:
  // `a` is row-major, sample_dim x embed_dim.
  LinearToyDenoiser(std::vector<double> a, std::size_t sample_dim,
                    std::size_t embed_dim);

  std::size_t sample_dim() const override { return rows_; }
  std::size_t embed_dim() const override { return cols_; }
  ad::Var predict_noise(ad::Tape& tape, ad::Var x_t, std::size_t t,
                        ad::Var e) const override;
  const std::vector<double>& matrix() const { return a_; }

 private:
  std::vector<double> a_;
  std::size_t rows_;
  std::size_t cols_;
};

struct EmbedConfig {
  std::size_t iterations = 3;
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  NoiseSchedule schedule = NoiseSchedule::linear();

  void validate() const;
};

// One Monte-Carlo batch of the noise-prediction loss.
struct NoiseBatch {
  std::vector<std::size_t> timesteps;
  std::vector<std::vector<double>> noise;
};

NoiseBatch draw_noise_batch(std::size_t batch_size, std::size_t sample_dim,
                            const NoiseSchedule& schedule, std::uint64_t seed);

ad::Var noise_prediction_loss(ad::Tape& tape, std::span<const double> x,
                              ad::Var e, const NoiseBatch& batch,
                              const Denoiser& denoiser,
                              const NoiseSchedule& schedule);
double noise_prediction_loss(std::span<const double> x,
                             std::span<const double> e, const NoiseBatch& batch,
                             const Denoiser& denoiser,
                             const NoiseSchedule& schedule);

// Runs config.iterations gradient steps from `label_embedding`; with zero
// iterations the result is label_embedding unchanged.
std::vector<double> embed_sample(std::span<const double> x,
                                 const Denoiser& denoiser,
                                 std::span<const double> label_embedding,
                                 const EmbedConfig& config);

// embed_sample over a dataset. Item i uses derive_seed(config.seed, i).
LabeledEmbeddingSet embed_dataset(
    std::span<const std::vector<double>> samples,
    std::span<const std::size_t> labels,
    std::span<const std::vector<double>> label_embeddings,
    const Denoiser& denoiser, const EmbedConfig& config);

// As above with explicit per-item seeds that travel with the items.
LabeledEmbeddingSet embed_dataset(
    std::span<const std::vector<double>> samples,
    std::span<const std::size_t> labels,
    std::span<const std::vector<double>> label_embeddings,
    const Denoiser& denoiser, const EmbedConfig& config,
    std::span<const std::uint64_t> item_seeds);

}  // namespace ncis

#endif  // NCIS_EMBEDDING_H_
