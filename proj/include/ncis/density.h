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

#ifndef NCIS_DENSITY_H_
#define NCIS_DENSITY_H_

// Class-conditional Gaussians in invariant space,
//
//   p_v(v | l) = N(v; mu_l, Sigma_l + lambda I),
//
// with mu_l the class mean and Sigma_l the biased (1/N_l) covariance. Since
// the cVPN is volume preserving, p_e(e | l) = p_v(f(e, l) | l) is a valid
// density in embedding space with no Jacobian factor.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncis/cvpn.h"
#include "ncis/dataset.h"

namespace ncis {

inline constexpr double kDefaultLambda = 1e-5;

struct ClassGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // biased, 1/N_l
  Eigen::MatrixXd cholesky;    // lower factor of covariance + lambda I
  double log_normalizer = 0.0; // -(D log 2pi + log det(Sigma + lambda I)) / 2
  std::vector<double> sorted_train_log_density;
};

class ClassGaussianBank {
 public:
  static constexpr std::int64_t kSchemaVersion = 1;

  // Every class needs at least two vectors; lambda must be > 0.
  static ClassGaussianBank fit(std::span<const std::vector<double>> vectors,
                               std::span<const std::size_t> labels,
                               std::size_t class_count, double lambda);

  std::size_t dim() const { return dim_; }
  std::size_t class_count() const { return classes_.size(); }
  double lambda() const { return lambda_; }
  const ClassGaussian& class_gaussian(std::size_t label) const;

  double log_density(std::span<const double> v, std::size_t label) const;
  // q-quantile (linear interpolation) of the class's training log-densities.
  double log_density_quantile(std::size_t label, double q) const;
  // mu + L z for a standard-normal vector z.
  std::vector<double> transform_standard_normal(std::size_t label,
                                                std::span<const double> z) const;

  void save(std::ostream& out) const;
  static ClassGaussianBank load(std::istream& in);
  std::string to_string() const;
  static ClassGaussianBank from_string(const std::string& text);

 private:
  void check_label(std::size_t label) const;
  void factorize(std::size_t label);

  std::size_t dim_ = 0;
  double lambda_ = kDefaultLambda;
  std::vector<ClassGaussian> classes_;
};

// Maps the training split through the cVPN and fits the bank there.
ClassGaussianBank fit_class_gaussians(const CvpnModel& model,
                                      const LabeledEmbeddingSet& data,
                                      double lambda);

double log_density_v(const ClassGaussianBank& bank, std::span<const double> v,
                     std::size_t label);
double log_density_e(const ClassGaussianBank& bank, const CvpnModel& model,
                     std::span<const double> e, std::size_t label);

}  // namespace ncis

#endif  // NCIS_DENSITY_H_
