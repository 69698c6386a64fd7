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
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ncis/errors.h"
#include "ncis/random.h"

namespace ncis {
namespace {

const std::vector<double> kA = {1.5, 0.3, -0.2, 1.2};

TEST(ForwardNoise, FullSignalKeepsInput) {
  const std::vector<double> x0 = {2.0, -1.0}, eps = {0.5, 0.5};
  EXPECT_EQ(forward_noise(x0, 1.0, eps), x0);
}

TEST(ForwardNoise, ZeroSignalGivesNoise) {
  const std::vector<double> x0 = {2.0, -1.0}, eps = {0.5, 0.25};
  EXPECT_EQ(forward_noise(x0, 0.0, eps), eps);
}

TEST(ForwardNoise, QuarterSignalHandExample) {
  const std::vector<double> x0 = {2.0, 0.0}, eps = {0.0, 2.0};
  const auto xt = forward_noise(x0, 0.25, eps);
  EXPECT_DOUBLE_EQ(xt[0], 1.0);
  EXPECT_DOUBLE_EQ(xt[1], std::sqrt(3.0));
}

TEST(ForwardNoise, TimestepOutOfRangeIsContractError) {
  const auto schedule = NoiseSchedule::linear(10);
  const std::vector<double> x0 = {1.0}, eps = {0.0};
  EXPECT_THROW(forward_noise(x0, 0, eps, schedule), ContractError);
  EXPECT_THROW(forward_noise(x0, 11, eps, schedule), ContractError);
  EXPECT_EQ(forward_noise(x0, 10, eps, schedule)[0], std::sqrt(schedule.alpha_bar(10)));
}

TEST(Schedule, LinearIsStrictlyDecreasingFromNearOne) {
  const auto s = NoiseSchedule::linear();
  EXPECT_EQ(s.steps(), 50u);
  EXPECT_GT(s.alpha_bar(1), 0.99);
  EXPECT_LT(s.alpha_bar(50), 0.01);
  for (std::size_t t = 2; t <= 50; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  EXPECT_THROW(NoiseSchedule({0.5, 0.6}), ContractError);
  EXPECT_THROW(NoiseSchedule({1.5}), ContractError);
}

EmbedConfig toy_config(std::size_t iterations, std::uint64_t seed) {
  EmbedConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  return cfg;
}

TEST(EmbedSample, ZeroIterationsReturnsLabelEmbeddingExactly) {
  const LinearToyDenoiser d(kA, 2, 2);
  const std::vector<double> x = {1.0, 2.0}, el = {0.123456789, -9.87654321};
  EXPECT_EQ(embed_sample(x, d, el, toy_config(0, 1)), el);
}

TEST(EmbedSample, ReachesClosedFormMinimizer) {
  const LinearToyDenoiser d(kA, 2, 2);
  const std::vector<double> x = {1.0, 2.0}, el = {0.0, 0.0};
  EmbedConfig cfg = toy_config(200, 2);
  cfg.batch_size = 512;
  // e* = A^-1 c x0 with c the mean of sqrt(abar_t) over t.
  double c = 0.0;
  for (std::size_t t = 1; t <= cfg.schedule.steps(); ++t) c += std::sqrt(cfg.schedule.alpha_bar(t));
  c /= static_cast<double>(cfg.schedule.steps());
  Eigen::Matrix2d a;
  a << kA[0], kA[1], kA[2], kA[3];
  const Eigen::Vector2d star = a.inverse() * (c * Eigen::Vector2d(x[0], x[1]));
  const auto e = embed_sample(x, d, el, cfg);
  EXPECT_LT((Eigen::Vector2d(e[0], e[1]) - star).norm() / star.norm(), 0.05);
}

TEST(EmbedSample, SameSeedIsBitwiseIdentical) {
  const LinearToyDenoiser d(kA, 2, 2);
  const std::vector<double> x = {0.3, -0.4}, el = {1.0, 1.0};
  EXPECT_EQ(embed_sample(x, d, el, toy_config(5, 3)), embed_sample(x, d, el, toy_config(5, 3)));
}

TEST(EmbedSample, DivergenceIsNumericErrorWithIteration) {
  const LinearToyDenoiser d({1e100, 0.0, 0.0, 1e100}, 2, 2);
  const std::vector<double> x = {1.0, 1.0}, el = {1.0, 1.0};
  EmbedConfig cfg = toy_config(50, 4);
  cfg.learning_rate = 1e10;
  try {
    embed_sample(x, d, el, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}

TEST(EmbedSample, InvalidConfigIsContractError) {
  const LinearToyDenoiser d(kA, 2, 2);
  const std::vector<double> x = {1.0, 1.0}, el = {1.0, 1.0};
  EmbedConfig cfg = toy_config(3, 5);
  cfg.batch_size = 0;
  EXPECT_THROW(embed_sample(x, d, el, cfg), ContractError);
  const std::vector<double> wrong = {1.0};
  EXPECT_THROW(embed_sample(x, d, wrong, toy_config(3, 5)), ContractError);
}

TEST(EmbedSample, HeldOutLossIsNonIncreasingInMedian) {
  const LinearToyDenoiser d(kA, 2, 2);
  const std::vector<double> x = {1.0, 2.0}, el = {-1.0, 0.5};
  const auto schedule = NoiseSchedule::linear();
  const NoiseBatch held_out = draw_noise_batch(256, 2, schedule, 999);
  const std::size_t max_iter = 10;
  std::vector<std::vector<double>> losses(max_iter + 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t it = 0; it <= max_iter; ++it) {
      const auto e = embed_sample(x, d, el, toy_config(it, seed));
      losses[it].push_back(noise_prediction_loss(x, e, held_out, d, schedule));
    }
  }
  double previous = INFINITY;
  for (auto& l : losses) {
    std::nth_element(l.begin(), l.begin() + 10, l.end());
    EXPECT_LE(l[10], previous);
    previous = l[10];
  }
}

TEST(NoiseLoss, GradientMatchesFiniteDifferences) {
  const LinearToyDenoiser d(kA, 2, 2);
  const auto schedule = NoiseSchedule::linear();
  const NoiseBatch batch = draw_noise_batch(16, 2, schedule, 6);
  const std::vector<double> x = {0.5, -1.5};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> e = {normal(rng), normal(rng)};
    ad::Tape tape;
    const ad::Var ev = tape.input(e);
    const ad::Var loss = noise_prediction_loss(tape, x, ev, batch, d, schedule);
    EXPECT_NEAR(tape.scalar_value(loss), noise_prediction_loss(x, e, batch, d, schedule), 1e-12);
    tape.backward(loss);
    const auto fd = ad::finite_diff_grad(
        [&](std::span<const double> p) { return noise_prediction_loss(x, p, batch, d, schedule); },
        e);
    EXPECT_LT(ad::relative_error(tape.grad(ev), fd), 1e-5);
  }
}

TEST(NoiseBatch, TimestepsAreInRange) {
  const auto schedule = NoiseSchedule::linear(20);
  const auto batch = draw_noise_batch(1000, 3, schedule, 8);
  ASSERT_EQ(batch.timesteps.size(), 1000u);
  for (auto t : batch.timesteps) {
    EXPECT_GE(t, 1u);
    EXPECT_LE(t, 20u);
  }
  EXPECT_EQ(batch.noise[0].size(), 3u);
}

struct Items {
  std::vector<std::vector<double>> samples;
  std::vector<std::size_t> labels;
};

Items toy_items(std::size_t n) {
  Items items;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    items.samples.push_back({normal(rng), normal(rng)});
    items.labels.push_back(i % 2);
  }
  return items;
}

const std::vector<std::vector<double>> kLabelEmbeddings = {{0.0, 0.0}, {1.0, -1.0}};

TEST(EmbedDataset, EmptyInputGivesEmptySet) {
  const LinearToyDenoiser d(kA, 2, 2);
  const auto set = embed_dataset({}, {}, kLabelEmbeddings, d, toy_config(3, 0));
  EXPECT_TRUE(set.empty());
}

TEST(EmbedDataset, PreservesOrderAndLabels) {
  const LinearToyDenoiser d(kA, 2, 2);
  const auto items = toy_items(10);
  const EmbedConfig cfg = toy_config(3, 10);
  const auto set = embed_dataset(items.samples, items.labels, kLabelEmbeddings, d, cfg);
  ASSERT_EQ(set.size(), 10u);
  EXPECT_EQ(set.labels, items.labels);
  for (std::size_t i = 0; i < 10; ++i) {
    EmbedConfig item = cfg;
    item.seed = derive_seed(cfg.seed, i);
    EXPECT_EQ(set.embeddings[i],
              embed_sample(items.samples[i], d, kLabelEmbeddings[items.labels[i]], item));
  }
}

TEST(EmbedDataset, ShuffledItemsWithTheirSeedsGiveSameMultiset) {
  const LinearToyDenoiser d(kA, 2, 2);
  const auto items = toy_items(12);
  const EmbedConfig cfg = toy_config(3, 11);
  std::vector<std::uint64_t> seeds(12);
  for (std::size_t i = 0; i < 12; ++i) seeds[i] = derive_seed(cfg.seed, i);
  const auto base = embed_dataset(items.samples, items.labels, kLabelEmbeddings, d, cfg, seeds);

  std::vector<std::size_t> order(12);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(12));
  Items shuffled;
  std::vector<std::uint64_t> shuffled_seeds;
  for (auto i : order) {
    shuffled.samples.push_back(items.samples[i]);
    shuffled.labels.push_back(items.labels[i]);
    shuffled_seeds.push_back(seeds[i]);
  }
  const auto other = embed_dataset(shuffled.samples, shuffled.labels, kLabelEmbeddings, d, cfg,
                                   shuffled_seeds);
  auto a = base.embeddings, b = other.embeddings;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(EmbedDataset, ItemErrorsNameTheIndex) {
  const LinearToyDenoiser d(kA, 2, 2);
  auto items = toy_items(3);
  items.labels[2] = 5;
  try {
    embed_dataset(items.samples, items.labels, kLabelEmbeddings, d, toy_config(1, 0));
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

}  // namespace
}  // namespace ncis
