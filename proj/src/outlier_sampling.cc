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

#include <cmath>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/text_io.h"

namespace ncis {

InvariantSample rejection_sample_below(const ClassGaussianBank& bank,
                                       std::size_t label, double threshold,
                                       std::size_t max_attempts, Rng& rng) {
  if (max_attempts == 0) throw ContractError("rejection sampling: max_attempts is 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(bank.dim());
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    for (auto& x : z) x = normal(rng);
    auto v = bank.transform_standard_normal(label, z);
    const double lp = bank.log_density(v, label);
    if (lp < threshold) return {std::move(v), lp, attempt};
  }
  throw SamplingError("rejection sampling for class " + std::to_string(label) +
                          ": no acceptance in " + std::to_string(max_attempts) +
                          " draws",
                      0.0);
}

InvariantSample rejection_sample_invariant(const ClassGaussianBank& bank,
                                           std::size_t label, double q,
                                           std::size_t max_attempts, Rng& rng) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ContractError("rejection sampling: q must lie in (0, 1)");
  }
  return rejection_sample_below(bank, label, bank.log_density_quantile(label, q),
                                max_attempts, rng);
}

std::vector<double> outlier_embedding(const CvpnModel& model,
                                      std::span<const double> v,
                                      std::size_t label) {
  return model.inverse(v, label);
}

std::size_t default_max_attempts(std::size_t n_per_class, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ContractError("q must lie in (0, 1)");
  return static_cast<std::size_t>(
      std::ceil(10.0 * static_cast<double>(n_per_class) / q));
}

OutlierSet synthesize_outliers(const CvpnModel& model,
                               const ClassGaussianBank& bank,
                               std::size_t n_per_class, double q,
                               std::size_t max_attempts, std::uint64_t seed) {
  if (n_per_class == 0) throw ContractError("synthesize_outliers: n_per_class must be >= 1");
  if (!(q > 0.0 && q < 1.0)) throw ContractError("synthesize_outliers: q must lie in (0, 1)");
  if (bank.dim() != model.dim() || bank.class_count() != model.class_count()) {
    throw ContractError("synthesize_outliers: bank and model disagree on shape");
  }
  const std::size_t budget =
      max_attempts == 0 ? default_max_attempts(n_per_class, q) : max_attempts;

  OutlierSet set;
  set.dim = model.dim();
  set.lambda = bank.lambda();
  set.quantile = q;
  set.seed = seed;
  for (std::size_t label = 0; label < model.class_count(); ++label) {
    Rng rng(derive_seed(seed, label));
    const double threshold = bank.log_density_quantile(label, q);
    std::size_t used = 0;
    auto exhausted = [&](std::size_t accepted) {
      const double rate =
          static_cast<double>(accepted) / static_cast<double>(budget);
      return SamplingError("class " + std::to_string(label) + ": budget of " +
                               std::to_string(budget) + " draws exhausted after " +
                               std::to_string(accepted) + " of " +
                               std::to_string(n_per_class) +
                               " outliers (acceptance rate " +
                               std::to_string(rate) + "); q is too strict",
                           rate);
    };
    for (std::size_t i = 0; i < n_per_class; ++i) {
      if (used >= budget) throw exhausted(i);
      InvariantSample s;
      try {
        s = rejection_sample_below(bank, label, threshold, budget - used, rng);
      } catch (const SamplingError&) {
        throw exhausted(i);
      }
      used += s.attempts;
      set.embeddings.push_back(outlier_embedding(model, s.v, label));
      set.labels.push_back(label);
      set.log_densities.push_back(s.log_density);
    }
    set.attempts_per_class.push_back(used);
  }
  return set;
}

double mean_invariant_magnitude(const CvpnModel& model, const OutlierSet& set) {
  if (set.empty()) throw ContractError("mean_invariant_magnitude: empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double sq = 0.0;
    for (double g : model.invariants(set.embeddings[i], set.labels[i])) sq += g * g;
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(set.size());
}

std::string write_outlier_csv(const OutlierSet& set) {
  std::ostringstream out;
  out << "class";
  for (std::size_t j = 0; j < set.dim; ++j) out << ",e" << j;
  out << ",log_density,lambda,q\n";
  const std::string lambda = text::format_double(set.lambda);
  const std::string q = text::format_double(set.quantile);
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i] << ',' << text::join_doubles(set.embeddings[i], ',')
        << ',' << text::format_double(set.log_densities[i]) << ',' << lambda
        << ',' << q << '\n';
  }
  return out.str();
}

OutlierSet read_outlier_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("header", "empty outlier CSV");
  const auto header = text::split(line, ',');
  if (header.size() < 5 || header.front() != "class" ||
      header[header.size() - 3] != "log_density" ||
      header[header.size() - 2] != "lambda" || header.back() != "q") {
    throw LoadError("header", "expected 'class,e0,...,log_density,lambda,q'");
  }
  OutlierSet set;
  set.dim = header.size() - 4;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    const std::string field = "row " + std::to_string(row);
    if (cells.size() != header.size()) throw LoadError(field, "wrong column count");
    const auto label = text::parse_int(cells[0], field + ".class");
    if (label < 0) throw LoadError(field + ".class", "negative class");
    std::vector<double> e;
    for (std::size_t j = 1; j <= set.dim; ++j) e.push_back(text::parse_double(cells[j], field));
    set.embeddings.push_back(std::move(e));
    set.labels.push_back(static_cast<std::size_t>(label));
    set.log_densities.push_back(text::parse_double(cells[set.dim + 1], field));
    set.lambda = text::parse_double(cells[set.dim + 2], field + ".lambda");
    set.quantile = text::parse_double(cells[set.dim + 3], field + ".q");
    ++row;
  }
  return set;
}

}  // namespace ncis
