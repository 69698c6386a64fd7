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
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/text_io.h"

namespace ncis {
namespace {

constexpr const char* kFormat = "ncis-density";

}  // namespace

ClassGaussianBank ClassGaussianBank::fit(
    std::span<const std::vector<double>> vectors,
    std::span<const std::size_t> labels, std::size_t class_count,
    double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ContractError("fit_class_gaussians: lambda must be > 0");
  }
  if (vectors.size() != labels.size()) {
    throw ContractError("fit_class_gaussians: vectors/labels length mismatch");
  }
  if (vectors.empty() || class_count == 0) {
    throw ContractError("fit_class_gaussians: no data");
  }
  ClassGaussianBank bank;
  bank.dim_ = vectors.front().size();
  bank.lambda_ = lambda;
  const auto D = static_cast<Eigen::Index>(bank.dim_);

  std::vector<std::size_t> counts(class_count, 0);
  bank.classes_.resize(class_count);
  for (auto& c : bank.classes_) {
    c.mean = Eigen::VectorXd::Zero(D);
    c.covariance = Eigen::MatrixXd::Zero(D, D);
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (labels[i] >= class_count) {
      throw ContractError("fit_class_gaussians: label out of range");
    }
    if (vectors[i].size() != bank.dim_) {
      throw ContractError("fit_class_gaussians: inconsistent dimension");
    }
    bank.classes_[labels[i]].mean +=
        Eigen::Map<const Eigen::VectorXd>(vectors[i].data(), D);
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < class_count; ++c) {
    if (counts[c] < 2) {
      throw ContractError("fit_class_gaussians: class " + std::to_string(c) +
                          " has fewer than 2 vectors");
    }
    bank.classes_[c].mean /= static_cast<double>(counts[c]);
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& c = bank.classes_[labels[i]];
    const Eigen::VectorXd d =
        Eigen::Map<const Eigen::VectorXd>(vectors[i].data(), D) - c.mean;
    c.covariance.noalias() += d * d.transpose();
  }
  for (std::size_t c = 0; c < class_count; ++c) {
    auto& cov = bank.classes_[c].covariance;
    cov /= static_cast<double>(counts[c]);
    bank.factorize(c);
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    bank.classes_[labels[i]].sorted_train_log_density.push_back(
        bank.log_density(vectors[i], labels[i]));
  }
  for (auto& c : bank.classes_) {
    std::sort(c.sorted_train_log_density.begin(), c.sorted_train_log_density.end());
  }
  return bank;
}

void ClassGaussianBank::factorize(std::size_t label) {
  auto& c = classes_[label];
  const auto D = static_cast<Eigen::Index>(dim_);
  const Eigen::MatrixXd reg =
      c.covariance + lambda_ * Eigen::MatrixXd::Identity(D, D);
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw NumericError("Cholesky of Sigma + lambda I failed for class " +
                       std::to_string(label));
  }
  c.cholesky = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < D; ++i) log_det += 2.0 * std::log(c.cholesky(i, i));
  c.log_normalizer =
      -0.5 * (static_cast<double>(D) * std::log(2.0 * std::numbers::pi) + log_det);
}

void ClassGaussianBank::check_label(std::size_t label) const {
  if (label >= classes_.size()) {
    throw ContractError("density: unknown class " + std::to_string(label));
  }
}

const ClassGaussian& ClassGaussianBank::class_gaussian(std::size_t label) const {
  check_label(label);
  return classes_[label];
}

double ClassGaussianBank::log_density(std::span<const double> v,
                                      std::size_t label) const {
  check_label(label);
  if (v.size() != dim_) throw ContractError("density: dimension mismatch");
  const auto& c = classes_[label];
  const auto D = static_cast<Eigen::Index>(dim_);
  const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(v.data(), D) - c.mean;
  const Eigen::VectorXd w =
      c.cholesky.triangularView<Eigen::Lower>().solve(d);
  return c.log_normalizer - 0.5 * w.squaredNorm();
}

double ClassGaussianBank::log_density_quantile(std::size_t label,
                                               double q) const {
  check_label(label);
  if (!(q >= 0.0 && q <= 1.0)) throw ContractError("quantile must lie in [0, 1]");
  const auto& sorted = classes_[label].sorted_train_log_density;
  if (sorted.empty()) throw ContractError("density: class has no training log-densities");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> ClassGaussianBank::transform_standard_normal(
    std::size_t label, std::span<const double> z) const {
  check_label(label);
  if (z.size() != dim_) throw ContractError("density: dimension mismatch");
  const auto& c = classes_[label];
  const auto D = static_cast<Eigen::Index>(dim_);
  const Eigen::VectorXd v =
      c.mean + c.cholesky.triangularView<Eigen::Lower>() *
                   Eigen::Map<const Eigen::VectorXd>(z.data(), D);
  return {v.data(), v.data() + dim_};
}

void ClassGaussianBank::save(std::ostream& out) const {
  out << "format " << kFormat << '\n';
  out << "schema_version " << kSchemaVersion << '\n';
  out << "dim " << dim_ << '\n';
  out << "class_count " << classes_.size() << '\n';
  out << "lambda " << text::format_double(lambda_) << '\n';
  for (std::size_t l = 0; l < classes_.size(); ++l) {
    const auto& c = classes_[l];
    out << "class " << l << '\n';
    out << "mean " << text::join_doubles({c.mean.data(), dim_}) << '\n';
    out << "covariance\n";
    for (std::size_t i = 0; i < dim_; ++i) {
      std::vector<double> row(dim_);
      for (std::size_t j = 0; j < dim_; ++j) {
        row[j] = c.covariance(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(j));
      }
      out << text::join_doubles(row) << '\n';
    }
    out << "train_log_density " << c.sorted_train_log_density.size() << '\n';
    out << text::join_doubles(c.sorted_train_log_density) << '\n';
  }
  out << "end\n";
}

ClassGaussianBank ClassGaussianBank::load(std::istream& in) {
  text::RecordReader reader(in);
  reader.expect_schema(kFormat, kSchemaVersion);
  ClassGaussianBank bank;
  const auto dim = reader.expect_int("dim");
  const auto classes = reader.expect_int("class_count");
  if (dim < 1) throw LoadError("dim", "must be >= 1");
  if (classes < 1) throw LoadError("class_count", "must be >= 1");
  bank.dim_ = static_cast<std::size_t>(dim);
  bank.lambda_ = reader.expect_double("lambda");
  if (!(bank.lambda_ > 0.0)) throw LoadError("lambda", "must be > 0");
  const auto D = static_cast<Eigen::Index>(dim);
  bank.classes_.resize(static_cast<std::size_t>(classes));
  for (std::size_t l = 0; l < bank.classes_.size(); ++l) {
    if (reader.expect_int("class") != static_cast<std::int64_t>(l)) {
      throw LoadError("class", "classes out of order");
    }
    auto& c = bank.classes_[l];
    const auto mean = reader.expect_doubles("mean", bank.dim_);
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), D);
    reader.expect("covariance");
    c.covariance.resize(D, D);
    for (Eigen::Index i = 0; i < D; ++i) {
      const auto row = reader.read_row("covariance", bank.dim_);
      for (Eigen::Index j = 0; j < D; ++j) c.covariance(i, j) = row[static_cast<std::size_t>(j)];
    }
    const auto n = reader.expect_int("train_log_density");
    if (n < 0) throw LoadError("train_log_density", "negative count");
    c.sorted_train_log_density =
        reader.read_row("train_log_density", static_cast<std::size_t>(n));
    if (!std::is_sorted(c.sorted_train_log_density.begin(),
                        c.sorted_train_log_density.end())) {
      throw LoadError("train_log_density", "values are not sorted");
    }
    try {
      bank.factorize(l);
    } catch (const NumericError& e) {
      throw LoadError("covariance", e.what());
    }
  }
  reader.expect("end");
  return bank;
}

std::string ClassGaussianBank::to_string() const {
  std::ostringstream out;
  save(out);
  return out.str();
}

ClassGaussianBank ClassGaussianBank::from_string(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

ClassGaussianBank fit_class_gaussians(const CvpnModel& model,
                                      const LabeledEmbeddingSet& data,
                                      double lambda) {
  const auto train = data.subset(Split::kTrain);
  train.validate(2);
  std::vector<std::vector<double>> v;
  v.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    v.push_back(model.forward(train.embeddings[i], train.labels[i]));
  }
  return ClassGaussianBank::fit(v, train.labels,
                                std::max(train.class_count, model.class_count()),
                                lambda);
}

double log_density_v(const ClassGaussianBank& bank, std::span<const double> v,
                     std::size_t label) {
  return bank.log_density(v, label);
}

double log_density_e(const ClassGaussianBank& bank, const CvpnModel& model,
                     std::span<const double> e, std::size_t label) {
  return bank.log_density(model.forward(e, label), label);
}

}  // namespace ncis
