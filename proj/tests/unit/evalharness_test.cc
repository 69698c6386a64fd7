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

#include "ncis/evalharness.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ncis/errors.h"

namespace ncis {
namespace {

double brute_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double a : id) {
    for (double b : ood) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Enumerates every candidate threshold and keeps the largest one that passes
// the required fraction of ID scores.
double brute_fpr(const std::vector<double>& id, const std::vector<double>& ood, double level) {
  double best = -INFINITY;
  for (double tau : id) {
    std::size_t pass = 0;
    for (double s : id) pass += s >= tau;
    if (static_cast<double>(pass) / static_cast<double>(id.size()) >= level) {
      best = std::max(best, tau);
    }
  }
  std::size_t fp = 0;
  for (double s : ood) fp += s >= best;
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, bool ties, double shift) {
  std::vector<double> v(n);
  std::normal_distribution<double> normal(shift, 1.0);
  std::uniform_int_distribution<int> small(0, 12);
  for (auto& x : v) x = ties ? small(rng) + (shift > 0 ? 2 : 0) : normal(rng);
  return v;
}

TEST(Auroc, HandExamples) {
  const std::vector<double> id1 = {2, 3}, ood1 = {0, 1};
  EXPECT_EQ(auroc(make_score_samples(id1, ood1)), 1.0);
  const std::vector<double> id2 = {2, 0}, ood2 = {1};
  EXPECT_EQ(auroc(make_score_samples(id2, ood2)), 0.5);
  const std::vector<double> same = {4, 4, 4};
  EXPECT_EQ(auroc(make_score_samples(same, same)), 0.5);
}

TEST(Auroc, SingleClassOrNonFiniteIsContractError) {
  const std::vector<double> some = {1, 2}, none;
  EXPECT_THROW(auroc(make_score_samples(some, none)), ContractError);
  EXPECT_THROW(auroc(make_score_samples(none, some)), ContractError);
  const std::vector<double> bad = {NAN};
  EXPECT_THROW(auroc(make_score_samples(bad, some)), ContractError);
}

TEST(Auroc, MatchesPairwiseOracleExactly) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 0;
    std::uniform_int_distribution<std::size_t> size(1, 100);
    const auto id = draw(rng, size(rng), ties, 0.7);
    const auto ood = draw(rng, size(rng), ties, 0.0);
    EXPECT_EQ(auroc(make_score_samples(id, ood)), brute_auroc(id, ood));
  }
}

TEST(Auroc, InvariantUnderMonotoneTransformAndComplement) {
  std::mt19937_64 rng(2);
  const auto id = draw(rng, 60, false, 0.5), ood = draw(rng, 40, false, 0.0);
  const double base = auroc(make_score_samples(id, ood));
  auto transform = [](std::vector<double> v) {
    for (auto& x : v) x = std::exp(0.5 * x) + 3.0;
    return v;
  };
  EXPECT_DOUBLE_EQ(auroc(make_score_samples(transform(id), transform(ood))), base);
  auto negate = [](std::vector<double> v) {
    for (auto& x : v) x = -x;
    return v;
  };
  EXPECT_DOUBLE_EQ(auroc(make_score_samples(negate(ood), negate(id))), base);
}

TEST(FprAtTpr, HandExample) {
  std::vector<double> id;
  for (int i = 1; i <= 20; ++i) id.push_back(i);
  const std::vector<double> ood = {0, 1.5, 3};
  EXPECT_DOUBLE_EQ(fpr_at_tpr(make_score_samples(id, ood)), 1.0 / 3.0);
}

TEST(FprAtTpr, SeparatedSetsGiveZero) {
  const std::vector<double> id = {5, 6, 7}, ood = {1, 2, 4.9};
  EXPECT_EQ(fpr_at_tpr(make_score_samples(id, ood)), 0.0);
}

TEST(FprAtTpr, MatchesThresholdEnumerationExactly) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 0;
    std::uniform_int_distribution<std::size_t> size(1, 100);
    const auto id = draw(rng, size(rng), ties, 0.7);
    // Every fourth set uses the ID scores as the OOD set.
    const auto ood = trial % 4 == 1 ? id : draw(rng, size(rng), ties, 0.0);
    for (double level : {0.95, 0.5, 1.0}) {
      EXPECT_EQ(fpr_at_tpr(make_score_samples(id, ood), level), brute_fpr(id, ood, level));
    }
  }
}

TEST(FprAtTpr, RejectsBadLevel) {
  const std::vector<double> a = {1}, b = {0};
  EXPECT_THROW(fpr_at_tpr(make_score_samples(a, b), 0.0), ContractError);
  EXPECT_THROW(fpr_at_tpr(make_score_samples(a, b), 1.5), ContractError);
}

TEST(ToyBenchmarkTest, DeterministicAndSized) {
  const auto a = make_toy_benchmark(4, 200);
  const auto b = make_toy_benchmark(4, 200);
  EXPECT_EQ(write_benchmark_csv(a), write_benchmark_csv(b));
  EXPECT_EQ(a.train.size(), 600u);
  EXPECT_EQ(a.train.class_counts(), (std::vector<std::size_t>{200, 200, 200}));
  EXPECT_EQ(a.held_out.size(), 600u);
  EXPECT_EQ(a.ood.size(), 600u);
  EXPECT_NE(write_benchmark_csv(make_toy_benchmark(5, 200)), write_benchmark_csv(a));
}

TEST(ToyBenchmarkTest, OodPointsRespectMarginAndBox) {
  const auto bench = make_toy_benchmark(6, 50);
  for (const auto& p : bench.ood) {
    EXPECT_GE(bench.distance_to_nearest_arc(p), bench.margin);
    EXPECT_GE(p[0], bench.box[0]);
    EXPECT_LE(p[0], bench.box[1]);
    EXPECT_GE(p[1], bench.box[2]);
    EXPECT_LE(p[1], bench.box[3]);
  }
}

TEST(ToyBenchmarkTest, IdPointsStayNearTheirArc) {
  const auto bench = make_toy_benchmark(7, 300);
  for (std::size_t i = 0; i < bench.train.size(); ++i) {
    // Five standard deviations of the normal noise.
    EXPECT_LT(bench.arcs[bench.train.labels[i]].distance(bench.train.embeddings[i]), 0.25);
  }
}

TEST(ToyBenchmarkTest, NoiseAtOrAboveMarginIsContractError) {
  EXPECT_THROW(make_toy_benchmark(0, 10, 0.3), ContractError);
}

TEST(ToyArcTest, DistanceHandExamples) {
  const ToyArc arc{0.0, 0.0, 1.0, 0.0, M_PI / 2};
  const std::vector<double> center = {0.0, 0.0}, outside = {2.0, 0.0}, behind = {0.0, -1.0};
  EXPECT_DOUBLE_EQ(arc.distance(center), 1.0);
  EXPECT_DOUBLE_EQ(arc.distance(outside), 1.0);
  EXPECT_DOUBLE_EQ(arc.distance(behind), std::sqrt(2.0));
}

TEST(MetricsCsv, Format) {
  const std::vector<MetricsRow> rows = {{"toy", "ncis", 0.05, 0.98, 1.0}};
  EXPECT_EQ(metrics_csv(rows), "dataset,method,fpr95,auroc,accuracy\ntoy,ncis,0.050000000000000003,0.97999999999999998,1\n");
}

}  // namespace
}  // namespace ncis
