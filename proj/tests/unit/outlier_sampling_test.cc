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

#include "ncis/outlier_sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ncis/errors.h"
#include "ncis/random.h"
#include "toy_fixture.h"

namespace ncis {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// 1-D bank with mean 0 and sigma^2 + lambda = 1, fitted on standardized
// normal draws.
ClassGaussianBank unit_bank_1d(std::size_t n, double lambda) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double scale = std::sqrt((1.0 - lambda) / var);
  std::vector<std::vector<double>> points;
  for (double v : x) points.push_back({(v - mean) * scale});
  const std::vector<std::size_t> labels(n, 0);
  return ClassGaussianBank::fit(points, labels, 1, lambda);
}

TEST(RejectionSample, InfiniteThresholdAcceptsFirstDraw) {
  const auto bank = unit_bank_1d(100, 1e-5);
  Rng rng(1);
  const auto s = rejection_sample_below(bank, 0, std::numeric_limits<double>::infinity(), 1, rng);
  EXPECT_EQ(s.attempts, 1u);
}

TEST(RejectionSample, TailMatchesAnalyticNormal) {
  const double lambda = 1e-5;
  const auto bank = unit_bank_1d(20000, lambda);
  const double q = 0.05;
  const double tau = bank.log_density_quantile(0, q);
  // log N(c; 0, 1) = tau.
  const double cutoff = std::sqrt(-2.0 * tau - kLog2Pi);
  EXPECT_NEAR(cutoff, 1.959964, 0.03);

  Rng rng(2);
  std::size_t attempts = 0;
  const int accepted = 3000;
  for (int i = 0; i < accepted; ++i) {
    const auto s = rejection_sample_invariant(bank, 0, q, 100000, rng);
    EXPECT_GT(std::abs(s.v[0]), cutoff);
    EXPECT_LT(s.log_density, tau);
    attempts += s.attempts;
  }
  const double rate = accepted / static_cast<double>(attempts);
  const double analytic = std::erfc(cutoff / std::sqrt(2.0));
  EXPECT_NEAR(rate, analytic, 0.1 * analytic);
}

TEST(RejectionSample, SameSeedSameSample) {
  const auto bank = unit_bank_1d(500, 1e-5);
  Rng a(3), b(3);
  EXPECT_EQ(rejection_sample_invariant(bank, 0, 0.05, 10000, a).v,
            rejection_sample_invariant(bank, 0, 0.05, 10000, b).v);
}

TEST(RejectionSample, ExhaustedBudgetReportsRate) {
  const auto bank = unit_bank_1d(500, 1e-5);
  Rng rng(4);
  try {
    rejection_sample_below(bank, 0, -1e6, 50, rng);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_EQ(e.acceptance_rate(), 0.0);
  }
}

TEST(RejectionSample, QuantileOutsideOpenIntervalIsContractError) {
  const auto bank = unit_bank_1d(100, 1e-5);
  Rng rng(5);
  EXPECT_THROW(rejection_sample_invariant(bank, 0, 0.0, 10, rng), ContractError);
  EXPECT_THROW(rejection_sample_invariant(bank, 0, 1.0, 10, rng), ContractError);
}

TEST(OutlierEmbedding, UntrainedModelIsIdentity) {
  const CvpnModel m = testing::untrained_toy_model();
  const std::vector<double> v = {0.7, -3.0};
  EXPECT_EQ(outlier_embedding(m, v, 2), v);
}

TEST(OutlierEmbedding, DensityIsPreservedAndRoundTrips) {
  const auto& m = testing::trained_toy_model();
  const auto& bank = testing::trained_toy_bank();
  Rng rng(6);
  for (std::size_t c = 0; c < 3; ++c) {
    for (int i = 0; i < 20; ++i) {
      const auto s = rejection_sample_invariant(bank, c, 0.05, 100000, rng);
      const auto e = outlier_embedding(m, s.v, c);
      const auto back = m.forward(e, c);
      for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(back[d], s.v[d], 1e-9);
      // Same value up to the round trip of the cVPN.
      EXPECT_NEAR(log_density_e(bank, m, e, c), log_density_v(bank, s.v, c), 1e-6);
      EXPECT_EQ(log_density_v(bank, m.forward(e, c), c), log_density_e(bank, m, e, c));
    }
  }
}

double nearest_distance(std::span<const double> p, const std::vector<std::vector<double>>& set,
                        const std::vector<double>* skip = nullptr) {
  double best = INFINITY;
  for (const auto& x : set) {
    if (skip && &x == skip) continue;
    best = std::min(best, std::hypot(x[0] - p[0], x[1] - p[1]));
  }
  return best;
}

TEST(OutlierEmbedding, TrainedOutliersLieOffTheManifold) {
  const auto& bench = testing::toy_benchmark();
  const auto set = synthesize_outliers(testing::trained_toy_model(),
                                       testing::trained_toy_bank(), 200, 0.05, 0, 7);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto id = bench.train.of_class(c);
    std::vector<double> intra;
    for (const auto& x : id) intra.push_back(nearest_distance(x, id, &x));
    std::sort(intra.begin(), intra.end());
    const double p95 = intra[static_cast<std::size_t>(0.95 * (intra.size() - 1))];

    std::vector<double> outlier_nn;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.labels[i] == c) outlier_nn.push_back(nearest_distance(set.embeddings[i], id));
    }
    std::sort(outlier_nn.begin(), outlier_nn.end());
    EXPECT_GT(outlier_nn[outlier_nn.size() / 2], p95) << "class " << c;
  }
}

TEST(Synthesize, ZeroPerClassIsContractError) {
  EXPECT_THROW(synthesize_outliers(testing::trained_toy_model(), testing::trained_toy_bank(),
                                   0, 0.05, 0, 1),
               ContractError);
}

TEST(Synthesize, ClassBalancedAndBelowThreshold) {
  const auto& bank = testing::trained_toy_bank();
  const auto set = synthesize_outliers(testing::trained_toy_model(), bank, 100, 0.05, 0, 8);
  ASSERT_EQ(set.size(), 300u);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    ++counts[set.labels[i]];
    EXPECT_LT(set.log_densities[i], bank.log_density_quantile(set.labels[i], 0.05));
  }
  EXPECT_EQ(counts, (std::vector<std::size_t>{100, 100, 100}));
  EXPECT_EQ(set.lambda, bank.lambda());
  EXPECT_EQ(set.quantile, 0.05);
  EXPECT_EQ(set.attempts_per_class.size(), 3u);
}

TEST(Synthesize, DeterministicGivenSeed) {
  const auto& m = testing::trained_toy_model();
  const auto& bank = testing::trained_toy_bank();
  const auto a = synthesize_outliers(m, bank, 50, 0.05, 0, 9);
  const auto b = synthesize_outliers(m, bank, 50, 0.05, 0, 9);
  EXPECT_EQ(write_outlier_csv(a), write_outlier_csv(b));
}

TEST(Synthesize, BudgetExhaustionNamesTheClass) {
  const auto& m = testing::trained_toy_model();
  const auto& bank = testing::trained_toy_bank();
  try {
    synthesize_outliers(m, bank, 100, 0.05, 10, 1);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("class"), std::string::npos);
  }
}

TEST(Synthesize, DefaultBudget) {
  EXPECT_EQ(default_max_attempts(100, 0.05), 20000u);
  EXPECT_EQ(default_max_attempts(1, 0.3), 34u);
}

TEST(OutlierCsv, RoundTrip) {
  const auto set = synthesize_outliers(testing::trained_toy_model(),
                                       testing::trained_toy_bank(), 5, 0.05, 0, 10);
  const std::string csv = write_outlier_csv(set);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,e0,e1,log_density,lambda,q");
  const auto back = read_outlier_csv(csv);
  EXPECT_EQ(back.embeddings, set.embeddings);
  EXPECT_EQ(back.labels, set.labels);
  EXPECT_EQ(write_outlier_csv(back), csv);
  EXPECT_THROW(read_outlier_csv("class,e0\n0,abc\n"), LoadError);
}

}  // namespace
}  // namespace ncis
