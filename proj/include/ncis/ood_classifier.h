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

#ifndef NCIS_OOD_CLASSIFIER_H_
#define NCIS_OOD_CLASSIFIER_H_

// Energy-regularized classifier.
//
//   f     : R^D -> R^C, tanh MLP with two hidden layers
//   E(x)  = -logsumexp(f(x))
//   phi   : R -> R, one tanh hidden layer, zero-initialized output layer
//   s(x)  = phi(E(x)), larger means more in-distribution
//
// Training minimizes CE + beta * L_ood with
//   L_ood = mean_ood -log sigmoid(-s) + mean_id -log sigmoid(s).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ncis/autodiff.h"
#include "ncis/dataset.h"
#include "ncis/outlier_sampling.h"
#include "ncis/parameters.h"

namespace ncis {

struct ClassifierConfig {
  std::size_t dim = 2;
  std::size_t class_count = 1;
  std::size_t hidden_width = 64;
  std::size_t phi_width = 8;
  std::uint64_t seed = 0;
};

struct ClassifierTapeBinding {
  std::vector<ad::Var> params;
};

class EnergyClassifier {
 public:
  static constexpr std::int64_t kSchemaVersion = 1;

  static EnergyClassifier build(const ClassifierConfig& config);

  const ClassifierConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }
  std::size_t class_count() const { return config_.class_count; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& mutable_parameters() { return params_; }
  // Names of the phi blocks ("phi.*"); the rest belong to f.
  static bool is_phi_parameter(const std::string& name);

  std::vector<double> logits(std::span<const double> x) const;
  double energy(std::span<const double> x) const;
  double phi(double energy) const;
  // s = phi(E(f(x))).
  double score(std::span<const double> x) const;

  ClassifierTapeBinding bind(ad::Tape& tape) const;
  ClassifierTapeBinding bind(ad::Tape& tape,
                             std::span<const ad::Var> params) const;
  ad::Var logits(ad::Tape& tape, const ClassifierTapeBinding& b,
                 ad::Var x) const;
  ad::Var phi(ad::Tape& tape, const ClassifierTapeBinding& b,
              ad::Var energy) const;

  void save(std::ostream& out) const;
  static EnergyClassifier load(std::istream& in);
  std::string to_string() const;
  static EnergyClassifier from_string(const std::string& text);

 private:
  EnergyClassifier() = default;
  void check_dim(std::size_t n) const;

  ClassifierConfig config_;
  ParameterSet params_;
};

// -logsumexp with max subtraction. Throws ContractError when empty.
double energy(std::span<const double> logits);
ad::Var energy(ad::Tape& tape, ad::Var logits);

double ood_regularization_loss(const EnergyClassifier& classifier,
                               std::span<const std::vector<double>> id_batch,
                               std::span<const std::vector<double>> ood_batch);

struct RegularizedLossReport {
  double total = 0.0;
  double cross_entropy = 0.0;
  double ood = 0.0;
  double mean_id_energy = 0.0;
  double mean_ood_energy = 0.0;
};

RegularizedLossReport total_loss(const EnergyClassifier& classifier,
                                 std::span<const std::vector<double>> id_batch,
                                 std::span<const std::size_t> id_labels,
                                 std::span<const std::vector<double>> ood_batch,
                                 double beta);

// Loss terms recorded on a tape. `ood` is left unset (id 0) when beta is 0
// and `with_ood` is false, so nothing flows into phi.
struct LossVars {
  ad::Var total;
  ad::Var cross_entropy;
  ad::Var ood;
  bool has_ood = false;
};

LossVars total_loss(ad::Tape& tape, const EnergyClassifier& classifier,
                    const ClassifierTapeBinding& binding,
                    std::span<const std::vector<double>> id_batch,
                    std::span<const std::size_t> id_labels,
                    std::span<const std::vector<double>> ood_batch, double beta,
                    bool with_ood);

// Loss value and gradient in parameters() order.
ad::ValueAndGradient total_loss_and_grad(
    const EnergyClassifier& classifier,
    std::span<const std::vector<double>> id_batch,
    std::span<const std::size_t> id_labels,
    std::span<const std::vector<double>> ood_batch, double beta);

// s = phi(E(f(x))). Throws ContractError on a dimension mismatch.
double ood_score(const EnergyClassifier& classifier, std::span<const double> x);
// -E(f(x)); the score used by the energy-only baseline.
double energy_score(const EnergyClassifier& classifier, std::span<const double> x);

struct ClassifierTrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 3e-3;
  std::size_t batch_size = 64;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 64;
  std::size_t phi_width = 8;

  void validate() const;
};

struct ClassifierTrainResult {
  EnergyClassifier classifier;
  std::vector<double> loss_history;  // total loss per step
};

// Adam on CE + beta * L_ood over the training split of `id_data`. Every step
// pairs batch_size ID points with batch_size outliers. Throws NumericError
// naming the epoch on a non-finite loss.
ClassifierTrainResult train_energy_classifier(const LabeledEmbeddingSet& id_data,
                                              const OutlierSet& outliers,
                                              const ClassifierTrainConfig& config);

// Fraction of points whose argmax logit equals the label.
double classification_accuracy(const EnergyClassifier& classifier,
                               const LabeledEmbeddingSet& data);

struct ScoreRecord {
  std::string tag;  // class label, or "ood"
  double score = 0.0;
  double energy = 0.0;
};

// "index,tag,score,energy".
std::string write_score_csv(std::span<const ScoreRecord> records);

}  // namespace ncis

#endif  // NCIS_OOD_CLASSIFIER_H_
