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

#include "ncis/invariant_training.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/optimizer.h"
#include "ncis/random.h"
#include "ncis/text_io.h"

namespace ncis {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractError("train: learning rate must be > 0");
  if (iterations == 0) throw ContractError("train: iteration budget must be > 0");
  if (batch_size == 0) throw ContractError("train: batch size must be > 0");
  if (!(variance_percent > 0.0 && variance_percent < 100.0)) {
    throw ContractError("train: p must lie in (0, 100)");
  }
  if (num_blocks == 0) throw ContractError("train: num_blocks must be > 0");
  if (hidden_width == 0) throw ContractError("train: hidden_width must be > 0");
}

InvariantCountSelection select_num_invariants(const LabeledEmbeddingSet& data,
                                              double percent) {
  if (!(percent > 0.0 && percent < 100.0)) {
    throw ContractError("select_num_invariants: p must lie in (0, 100)");
  }
  data.validate(2);
  const std::size_t D = data.dim;
  if (D < 2) throw ContractError("select_num_invariants: need D >= 2");

  InvariantCountSelection out;
  for (std::size_t c = 0; c < data.class_count; ++c) {
    const auto points = data.of_class(c);
    const auto n = static_cast<double>(points.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
    for (const auto& p : points) mean += Eigen::Map<const Eigen::VectorXd>(p.data(), D);
    mean /= n;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
    for (const auto& p : points) {
      const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(p.data(), D) - mean;
      cov += d * d.transpose();
    }
    cov /= n;
    // Ascending order.
    Eigen::VectorXd eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .cwiseMax(0.0);
    const double total = eig.sum();
    std::size_t k_class = 0;
    if (total <= 0.0) {
      k_class = D - 1;
      out.warnings.push_back("class " + std::to_string(c) +
                             " has zero variance; using K_l = D-1");
    } else {
      double partial = 0.0;
      for (std::size_t m = 1; m <= D; ++m) {
        partial += eig[static_cast<Eigen::Index>(m - 1)];
        if (partial / total < percent / 100.0) {
          k_class = m;
        } else {
          break;
        }
      }
    }
    out.per_class.push_back(k_class);
  }

  // Round half up: floor(sum / C + 1/2) in integer arithmetic.
  const std::size_t sum =
      std::accumulate(out.per_class.begin(), out.per_class.end(), std::size_t{0});
  const std::size_t classes = out.per_class.size();
  std::size_t k = (2 * sum + classes) / (2 * classes);
  out.k = std::clamp<std::size_t>(k, 1, D - 1);
  return out;
}

double invariant_loss(const CvpnModel& model, const LabeledEmbeddingSet& batch) {
  if (batch.empty()) throw ContractError("invariant_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (double g : model.invariants(batch.embeddings[i], batch.labels[i])) {
      total += g * g;
    }
  }
  return total / static_cast<double>(batch.size());
}

ad::Var invariant_loss(ad::Tape& tape, const CvpnModel& model,
                       const CvpnTapeBinding& binding,
                       const LabeledEmbeddingSet& data,
                       std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("invariant_loss: empty batch");
  const std::size_t K = model.num_invariants();
  ad::Var total{};
  bool first = true;
  for (std::size_t r : rows) {
    const ad::Var e = tape.input(data.embeddings[r]);
    const ad::Var v = model.forward(tape, binding, e, data.labels[r]);
    const ad::Var sq = tape.sum_squares(tape.slice(v, 0, K));
    total = first ? sq : tape.add(total, sq);
    first = false;
  }
  return tape.scale(total, 1.0 / static_cast<double>(rows.size()));
}

ad::ValueAndGradient invariant_loss_and_grad(const CvpnModel& model,
                                             const LabeledEmbeddingSet& data,
                                             std::span<const std::size_t> rows) {
  ad::Tape tape;
  const auto binding = model.bind(tape);
  const ad::Var loss = invariant_loss(tape, model, binding, data, rows);
  tape.backward(loss);
  ad::ValueAndGradient out;
  out.value = tape.scalar_value(loss);
  for (ad::Var p : binding.params) {
    const auto g = tape.grad(p);
    out.gradient.emplace_back(g.begin(), g.end());
  }
  return out;
}

TrainResult train_cvpn(CvpnModel model, const LabeledEmbeddingSet& data,
                       const TrainConfig& config) {
  config.validate();
  const LabeledEmbeddingSet train = data.subset(Split::kTrain);
  train.validate();
  if (train.empty()) throw ContractError("train_cvpn: no training points");
  if (train.dim != model.dim()) {
    throw ContractError("train_cvpn: data dimension does not match the model");
  }

  Rng rng(derive_seed(config.seed, 0x637670ULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(config.batch_size, train.size());
  std::vector<std::size_t> rows(batch);

  ParameterSet params = model.parameters();
  AdamOptimizer adam(params, {.learning_rate = config.learning_rate});
  TrainResult result{model, {}};
  result.loss_history.reserve(config.iterations);
  ad::Tape tape;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows[b] = order[cursor++];
    }
    tape.clear();
    ad::Var loss{};
    try {
      const auto binding = model.bind(tape);
      loss = invariant_loss(tape, model, binding, train, rows);
      tape.backward(loss);
      ad::Gradient grad;
      grad.reserve(binding.params.size());
      for (ad::Var p : binding.params) {
        const auto g = tape.grad(p);
        grad.emplace_back(g.begin(), g.end());
      }
      result.loss_history.push_back(tape.scalar_value(loss));
      adam.step(params, grad);
      model.set_parameters(params);
    } catch (const NumericError& e) {
      throw NumericError("train_cvpn: iteration " + std::to_string(it) + ": " +
                         e.what());
    }
  }
  result.model = std::move(model);
  return result;
}

std::string loss_history_csv(const std::vector<double>& history) {
  std::ostringstream out;
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << i << ',' << text::format_double(history[i]) << '\n';
  }
  return out.str();
}

}  // namespace ncis
