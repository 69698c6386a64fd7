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

#include "ncis/embedding.h"

#include <algorithm>
#include <cmath>

#include "ncis/errors.h"
#include "ncis/random.h"

namespace ncis {

NoiseSchedule NoiseSchedule::linear(std::size_t steps) {
  const double scale = 1000.0 / static_cast<double>(steps);
  // Short schedules would push beta_end past 1; cap it.
  return linear(steps, std::min(1e-4 * scale, 0.5), std::min(0.02 * scale, 0.5));
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start,
                                    double beta_end) {
  if (steps == 0) throw ContractError("noise schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw ContractError("noise schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> alpha_bar(steps);
  double prod = 1.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double frac =
        steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    prod *= 1.0 - beta;
    alpha_bar[i] = prod;
  }
  return NoiseSchedule(std::move(alpha_bar));
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar)
    : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.empty()) throw ContractError("noise schedule: empty");
  for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
    if (!(alpha_bar_[i] > 0.0 && alpha_bar_[i] <= 1.0)) {
      throw ContractError("noise schedule: abar must lie in (0, 1]");
    }
    if (i > 0 && !(alpha_bar_[i] < alpha_bar_[i - 1])) {
      throw ContractError("noise schedule: abar must be strictly decreasing");
    }
  }
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  if (t < 1 || t > alpha_bar_.size()) {
    throw ContractError("noise schedule: timestep " + std::to_string(t) +
                        " outside [1, " + std::to_string(alpha_bar_.size()) + "]");
  }
  return alpha_bar_[t - 1];
}

std::vector<double> forward_noise(std::span<const double> x0, double alpha_bar,
                                  std::span<const double> eps) {
  if (x0.size() != eps.size()) throw ContractError("forward_noise: size mismatch");
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw ContractError("forward_noise: abar must lie in [0, 1]");
  }
  const double a = std::sqrt(alpha_bar);
  const double b = std::sqrt(1.0 - alpha_bar);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

std::vector<double> forward_noise(std::span<const double> x0, std::size_t t,
                                  std::span<const double> eps,
                                  const NoiseSchedule& schedule) {
  return forward_noise(x0, schedule.alpha_bar(t), eps);
}

LinearToyDenoiser::LinearToyDenoiser(std::vector<double> a,
                                     std::size_t sample_dim,
                                     std::size_t embed_dim)
    : a_(std::move(a)), rows_(sample_dim), cols_(embed_dim) {
  if (a_.size() != rows_ * cols_) {
    throw ContractError("LinearToyDenoiser: matrix size mismatch");
  }
}

ad::Var LinearToyDenoiser::predict_noise(ad::Tape& tape, ad::Var x_t,
                                         std::size_t /*t*/, ad::Var e) const {
  const ad::Var a = tape.input(a_, rows_, cols_);
  return tape.sub(x_t, tape.matvec(a, e));
}

void EmbedConfig::validate() const {
  if (batch_size == 0) throw ContractError("embed: batch size must be > 0");
  if (!(learning_rate > 0.0)) throw ContractError("embed: learning rate must be > 0");
}

NoiseBatch draw_noise_batch(std::size_t batch_size, std::size_t sample_dim,
                            const NoiseSchedule& schedule, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> step(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  NoiseBatch batch;
  batch.timesteps.resize(batch_size);
  batch.noise.assign(batch_size, std::vector<double>(sample_dim));
  for (std::size_t b = 0; b < batch_size; ++b) {
    batch.timesteps[b] = step(rng);
    for (auto& x : batch.noise[b]) x = normal(rng);
  }
  return batch;
}

ad::Var noise_prediction_loss(ad::Tape& tape, std::span<const double> x,
                              ad::Var e, const NoiseBatch& batch,
                              const Denoiser& denoiser,
                              const NoiseSchedule& schedule) {
  if (batch.timesteps.empty()) throw ContractError("embed: empty noise batch");
  ad::Var total{};
  for (std::size_t b = 0; b < batch.timesteps.size(); ++b) {
    const auto x_t = forward_noise(x, batch.timesteps[b], batch.noise[b], schedule);
    const ad::Var xt = tape.input(x_t);
    const ad::Var pred = denoiser.predict_noise(tape, xt, batch.timesteps[b], e);
    if (tape.size(pred) != x.size()) {
      throw ContractError("embed: denoiser output dimension differs from input");
    }
    const ad::Var r = tape.sub(tape.input(batch.noise[b]), pred);
    const ad::Var sq = tape.sum_squares(r);
    total = b == 0 ? sq : tape.add(total, sq);
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.timesteps.size()));
}

double noise_prediction_loss(std::span<const double> x,
                             std::span<const double> e, const NoiseBatch& batch,
                             const Denoiser& denoiser,
                             const NoiseSchedule& schedule) {
  ad::Tape tape;
  const ad::Var ev = tape.input(e);
  return tape.scalar_value(
      noise_prediction_loss(tape, x, ev, batch, denoiser, schedule));
}

std::vector<double> embed_sample(std::span<const double> x,
                                 const Denoiser& denoiser,
                                 std::span<const double> label_embedding,
                                 const EmbedConfig& config) {
  config.validate();
  if (x.size() != denoiser.sample_dim() ||
      label_embedding.size() != denoiser.embed_dim()) {
    throw ContractError("embed_sample: dimensions do not match the denoiser");
  }
  std::vector<double> e(label_embedding.begin(), label_embedding.end());
  ad::Tape tape;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const NoiseBatch batch = draw_noise_batch(config.batch_size, x.size(),
                                              config.schedule,
                                              derive_seed(config.seed, it));
    tape.clear();
    try {
      const ad::Var ev = tape.input(e);
      const ad::Var loss =
          noise_prediction_loss(tape, x, ev, batch, denoiser, config.schedule);
      tape.backward(loss);
      const auto g = tape.grad(ev);
      for (std::size_t i = 0; i < e.size(); ++i) e[i] -= config.learning_rate * g[i];
    } catch (const NumericError& err) {
      throw NumericError("embed_sample: iteration " + std::to_string(it) + ": " +
                         err.what());
    }
  }
  return e;
}

LabeledEmbeddingSet embed_dataset(
    std::span<const std::vector<double>> samples,
    std::span<const std::size_t> labels,
    std::span<const std::vector<double>> label_embeddings,
    const Denoiser& denoiser, const EmbedConfig& config) {
  std::vector<std::uint64_t> seeds(samples.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(config.seed, i);
  return embed_dataset(samples, labels, label_embeddings, denoiser, config, seeds);
}

LabeledEmbeddingSet embed_dataset(
    std::span<const std::vector<double>> samples,
    std::span<const std::size_t> labels,
    std::span<const std::vector<double>> label_embeddings,
    const Denoiser& denoiser, const EmbedConfig& config,
    std::span<const std::uint64_t> item_seeds) {
  if (samples.size() != labels.size() || samples.size() != item_seeds.size()) {
    throw ContractError("embed_dataset: samples, labels and seeds differ in length");
  }
  LabeledEmbeddingSet out;
  out.dim = denoiser.embed_dim();
  out.class_count = label_embeddings.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (labels[i] >= label_embeddings.size()) {
      throw ContractError("embed_dataset: item " + std::to_string(i) +
                          " has unknown label " + std::to_string(labels[i]));
    }
    EmbedConfig item = config;
    item.seed = item_seeds[i];
    try {
      out.add(embed_sample(samples[i], denoiser, label_embeddings[labels[i]], item),
              labels[i]);
    } catch (const std::exception& err) {
      throw NumericError("embed_dataset: item " + std::to_string(i) + ": " +
                         err.what());
    }
  }
  out.class_count = label_embeddings.size();
  return out;
}

}  // namespace ncis
