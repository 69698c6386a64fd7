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

#include "ncis/density.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "ncis/errors.h"
#include "toy_fixture.h"

namespace ncis {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

// Dense-inverse evaluation of N(v; mu, sigma).
double dense_log_normal(const Eigen::VectorXd& v, const Eigen::VectorXd& mu,
                        const Eigen::MatrixXd& sigma) {
  const Eigen::VectorXd d = v - mu;
  const double quad = d.dot(sigma.inverse() * d);
  return -0.5 * (static_cast<double>(v.size()) * kLog2Pi +
                 std::log(sigma.determinant()) + quad);
}

ClassGaussianBank fit_one(const std::vector<std::vector<double>>& points, double lambda) {
  const std::vector<std::size_t> labels(points.size(), 0);
  return ClassGaussianBank::fit(points, labels, 1, lambda);
}

TEST(FitGaussians, TwoPointHandExample) {
  const auto bank = fit_one({{0.0, 0.0}, {2.0, 0.0}}, 0.25);
  const auto& g = bank.class_gaussian(0);
  EXPECT_EQ(g.mean, Eigen::Vector2d(1.0, 0.0));
  Eigen::Matrix2d sigma;
  sigma << 1.0, 0.0, 0.0, 0.0;
  EXPECT_EQ(g.covariance, sigma);
  const Eigen::MatrixXd reg = g.cholesky * g.cholesky.transpose();
  Eigen::Matrix2d expected;
  expected << 1.25, 0.0, 0.0, 0.25;
  EXPECT_LT((reg - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FitGaussians, RepeatedPointHasZeroCovariance) {
  const auto bank = fit_one({{1.0, -2.0}, {1.0, -2.0}, {1.0, -2.0}}, 1e-5);
  const auto& g = bank.class_gaussian(0);
  EXPECT_EQ(g.covariance, Eigen::Matrix2d::Zero());
  const Eigen::MatrixXd reg = g.cholesky * g.cholesky.transpose();
  EXPECT_LT((reg - 1e-5 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-20);
}

TEST(FitGaussians, CovarianceMatchesOuterProductAverage) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> points;
  for (int i = 0; i < 50; ++i) {
    const double a = normal(rng), b = normal(rng);
    points.push_back({1.0 + 2.0 * a, -0.5 + 0.7 * a + 0.3 * b});
  }
  double m0 = 0.0, m1 = 0.0;
  for (const auto& p : points) {
    m0 += p[0];
    m1 += p[1];
  }
  m0 /= 50.0;
  m1 /= 50.0;
  double s00 = 0.0, s01 = 0.0, s11 = 0.0;
  for (const auto& p : points) {
    s00 += (p[0] - m0) * (p[0] - m0);
    s01 += (p[0] - m0) * (p[1] - m1);
    s11 += (p[1] - m1) * (p[1] - m1);
  }
  const auto bank = fit_one(points, 1e-5);
  const auto& cov = bank.class_gaussian(0).covariance;
  EXPECT_NEAR(cov(0, 0), s00 / 50.0, 1e-12);
  EXPECT_NEAR(cov(0, 1), s01 / 50.0, 1e-12);
  EXPECT_NEAR(cov(1, 0), s01 / 50.0, 1e-12);
  EXPECT_NEAR(cov(1, 1), s11 / 50.0, 1e-12);
}

TEST(FitGaussians, RejectsBadInput) {
  EXPECT_THROW(fit_one({{0.0}, {1.0}}, 0.0), ContractError);
  EXPECT_THROW(fit_one({{0.0}}, 1e-5), ContractError);
  const std::vector<std::vector<double>> pts = {{0.0}, {1.0}};
  const std::vector<std::size_t> labels = {0, 1};
  EXPECT_THROW(ClassGaussianBank::fit(pts, labels, 2, 1e-5), ContractError);
}

TEST(LogDensity, StandardNormalPeak) {
  const double lambda = 1e-5;
  const double a = std::sqrt(1.0 - lambda);
  const auto bank = fit_one({{-a}, {a}}, lambda);
  const std::vector<double> v = {0.0};
  EXPECT_NEAR(log_density_v(bank, v, 0), -0.918938533204673, 1e-12);
}

TEST(LogDensity, AtMeanIsNormalizer) {
  const auto bank = fit_one({{0.0, 1.0, 2.0}, {1.0, 0.0, 0.5}, {3.0, 2.0, -1.0}, {0.0, 0.0, 0.0}},
                            0.1);
  const auto& g = bank.class_gaussian(0);
  const Eigen::MatrixXd reg = g.covariance + 0.1 * Eigen::MatrixXd::Identity(3, 3);
  const std::vector<double> mu(g.mean.data(), g.mean.data() + 3);
  EXPECT_NEAR(log_density_v(bank, mu, 0), -0.5 * (3 * kLog2Pi + std::log(reg.determinant())),
              1e-12);
}

TEST(LogDensity, MatchesDenseInverse) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 90; ++i) {
    const auto c = static_cast<std::size_t>(i % 3);
    points.push_back({normal(rng) + c, 0.5 * normal(rng), normal(rng) * (c + 1.0)});
    labels.push_back(c);
  }
  const auto bank = ClassGaussianBank::fit(points, labels, 3, 1e-3);
  for (int i = 0; i < 100; ++i) {
    const auto c = static_cast<std::size_t>(i % 3);
    const std::vector<double> v = {2 * normal(rng), 2 * normal(rng), 2 * normal(rng)};
    const auto& g = bank.class_gaussian(c);
    const Eigen::MatrixXd reg = g.covariance + 1e-3 * Eigen::MatrixXd::Identity(3, 3);
    EXPECT_NEAR(log_density_v(bank, v, c),
                dense_log_normal(Eigen::Map<const Eigen::VectorXd>(v.data(), 3), g.mean, reg),
                1e-10);
  }
}

TEST(LogDensity, UnknownClassIsContractError) {
  const auto bank = fit_one({{0.0}, {1.0}}, 1e-5);
  const std::vector<double> v = {0.0};
  EXPECT_THROW(log_density_v(bank, v, 1), ContractError);
}

TEST(LogDensity, LambdaInflationRaisesDensityAlongFlatDirection) {
  const std::vector<std::vector<double>> points = {{0.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}};
  // Increasing in lambda while v^2 exceeds lambda along the flat direction.
  const std::vector<double> v = {0.0, 0.1};
  double previous = -INFINITY;
  for (double lambda : {1e-6, 1e-5, 1e-4, 1e-3}) {
    const double ld = log_density_v(fit_one(points, lambda), v, 0);
    EXPECT_GT(ld, previous);
    previous = ld;
  }
}

TEST(LogDensityE, IdentityModelEqualsInvariantSpace) {
  const CvpnModel m = testing::untrained_toy_model();
  const auto bank = fit_class_gaussians(m, testing::toy_benchmark().train, 1e-5);
  const std::vector<double> e = {0.3, -1.2};
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(log_density_e(bank, m, e, c), log_density_v(bank, e, c));
  }
}

TEST(LogDensityE, IntegratesToOneUnderRandomizedUnimodularMap) {
  CvpnConfig cfg;
  cfg.dim = 2;
  cfg.num_invariants = 1;
  cfg.num_blocks = 2;
  cfg.class_count = 1;
  cfg.hidden_width = 8;
  cfg.seed = 1;
  CvpnModel m = CvpnModel::build(cfg);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 0.3);
  ParameterSet p = m.parameters();
  std::vector<double> flat(p.total_size());
  for (auto& x : flat) x = normal(rng);
  p.unflatten(flat);
  m.set_parameters(std::move(p));

  LabeledEmbeddingSet data;
  data.dim = 2;
  data.class_count = 1;
  for (int i = 0; i < 200; ++i) data.add({normal(rng), 2.0 * normal(rng)}, 0);
  const auto bank = fit_class_gaussians(m, data, 1e-3);

  // The box is the bounding box of the preimage of a 7-sigma cube.
  double lo[2] = {1e9, 1e9}, hi[2] = {-1e9, -1e9};
  for (int i = -40; i <= 40; ++i) {
    for (int j = -40; j <= 40; ++j) {
      const std::vector<double> z = {7.0 * i / 40.0, 7.0 * j / 40.0};
      const auto e = m.inverse(bank.transform_standard_normal(0, z), 0);
      for (int d = 0; d < 2; ++d) {
        lo[d] = std::min(lo[d], e[d]);
        hi[d] = std::max(hi[d], e[d]);
      }
    }
  }
  const int n = 800;
  const double hx = (hi[0] - lo[0]) / n, hy = (hi[1] - lo[1]) / n;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::vector<double> e = {lo[0] + (i + 0.5) * hx, lo[1] + (j + 0.5) * hy};
      mass += std::exp(log_density_e(bank, m, e, 0));
    }
  }
  EXPECT_NEAR(mass * hx * hy, 1.0, 0.02);
}

TEST(LogDensityE, TrainingPointsOutscoreOffManifoldPoints) {
  const auto& bench = testing::toy_benchmark();
  const auto& m = testing::trained_toy_model();
  const auto& bank = testing::trained_toy_bank();
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> id, ood;
    for (const auto& e : bench.train.of_class(c)) id.push_back(log_density_e(bank, m, e, c));
    for (const auto& e : bench.ood) ood.push_back(log_density_e(bank, m, e, c));
    EXPECT_GT(median(id), median(ood));
  }
}

TEST(Quantile, LinearInterpolation) {
  const auto bank = fit_one({{-1.0}, {0.0}, {1.0}}, 1e-5);
  const auto& sorted = bank.class_gaussian(0).sorted_train_log_density;
  ASSERT_EQ(sorted.size(), 3u);
  EXPECT_TRUE(std::is_sorted(sorted.begin(), sorted.end()));
  EXPECT_EQ(bank.log_density_quantile(0, 0.0), sorted[0]);
  EXPECT_EQ(bank.log_density_quantile(0, 1.0), sorted[2]);
  EXPECT_DOUBLE_EQ(bank.log_density_quantile(0, 0.25), 0.5 * (sorted[0] + sorted[1]));
}

TEST(BankArtifact, RoundTripAndErrors) {
  const auto& bank = testing::trained_toy_bank();
  const std::string text = bank.to_string();
  const auto back = ClassGaussianBank::from_string(text);
  EXPECT_EQ(back.to_string(), text);
  const std::vector<double> v = {0.1, 0.2};
  EXPECT_EQ(log_density_v(back, v, 2), log_density_v(bank, v, 2));
  EXPECT_THROW(ClassGaussianBank::from_string(text.substr(0, text.size() / 3)), LoadError);
  std::string bumped = text;
  bumped.replace(bumped.find("schema_version 1"), 16, "schema_version 9");
  EXPECT_THROW(ClassGaussianBank::from_string(bumped), VersionError);
}

}  // namespace
}  // namespace ncis
