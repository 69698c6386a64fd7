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

#include "ncis/ood_classifier.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/optimizer.h"
#include "ncis/random.h"
#include "ncis/text_io.h"

namespace ncis {
namespace {

constexpr const char* kFormat = "ncis-classifier";
constexpr double kPhiInputScale = 0.3;

// Block order in the ParameterSet.
enum Block : std::size_t {
  kW1, kB1, kW2, kB2, kW3, kB3, kPhiW1, kPhiB1, kPhiW2, kPhiB2, kBlockCount
};

std::vector<double> gaussian_values(Rng& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = stddev * normal(rng);
  return v;
}

// W x + b.
std::vector<double> affine(const Parameter& w, const Parameter& b,
                           std::span<const double> x) {
  std::vector<double> out(w.rows);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.values.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc + b.values[r];
  }
  return out;
}

void tanh_inplace(std::vector<double>& v) {
  for (auto& x : v) x = std::tanh(x);
}

ad::Var affine(ad::Tape& tape, ad::Var w, ad::Var b, ad::Var x) {
  return tape.add(tape.matvec(w, x), b);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EnergyClassifier EnergyClassifier::build(const ClassifierConfig& config) {
  if (config.dim == 0) throw ContractError("classifier: dim must be >= 1");
  if (config.class_count < 2) throw ContractError("classifier: need >= 2 classes");
  if (config.hidden_width == 0 || config.phi_width == 0) {
    throw ContractError("classifier: widths must be >= 1");
  }
  EnergyClassifier c;
  c.config_ = config;
  Rng rng(derive_seed(config.seed, 0x636c66));
  const std::size_t d = config.dim, h = config.hidden_width,
                    k = config.class_count, p = config.phi_width;
  auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  c.params_.add("f.w1", h, d, gaussian_values(rng, h * d, fan(d)));
  c.params_.add("f.b1", h, 1);
  c.params_.add("f.w2", h, h, gaussian_values(rng, h * h, fan(h)));
  c.params_.add("f.b2", h, 1);
  c.params_.add("f.w3", k, h, gaussian_values(rng, k * h, fan(h)));
  c.params_.add("f.b3", k, 1);
  // Raw energies span several units; a small input scale keeps phi's hidden
  // units out of saturation at the start.
  c.params_.add("phi.w1", p, 1, gaussian_values(rng, p, kPhiInputScale));
  c.params_.add("phi.b1", p, 1);
  c.params_.add("phi.w2", 1, p);
  c.params_.add("phi.b2", 1, 1);
  return c;
}

bool EnergyClassifier::is_phi_parameter(const std::string& name) {
  return name.rfind("phi.", 0) == 0;
}

void EnergyClassifier::check_dim(std::size_t n) const {
  if (n != config_.dim) {
    throw ContractError("classifier: input has dimension " + std::to_string(n) +
                        ", expected " + std::to_string(config_.dim));
  }
}

std::vector<double> EnergyClassifier::logits(std::span<const double> x) const {
  check_dim(x.size());
  auto h1 = affine(params_[kW1], params_[kB1], x);
  tanh_inplace(h1);
  auto h2 = affine(params_[kW2], params_[kB2], h1);
  tanh_inplace(h2);
  return affine(params_[kW3], params_[kB3], h2);
}

double EnergyClassifier::energy(std::span<const double> x) const {
  return ncis::energy(logits(x));
}

double EnergyClassifier::phi(double e) const {
  const double in[1] = {e};
  auto h = affine(params_[kPhiW1], params_[kPhiB1], in);
  tanh_inplace(h);
  return affine(params_[kPhiW2], params_[kPhiB2], h)[0];
}

double EnergyClassifier::score(std::span<const double> x) const {
  return phi(energy(x));
}

ClassifierTapeBinding EnergyClassifier::bind(ad::Tape& tape) const {
  ClassifierTapeBinding b;
  for (const auto& p : params_) b.params.push_back(tape.input(p.values, p.rows, p.cols));
  return b;
}

ClassifierTapeBinding EnergyClassifier::bind(
    ad::Tape& /*tape*/, std::span<const ad::Var> params) const {
  if (params.size() != params_.size()) {
    throw ContractError("classifier: wrong number of bound parameters");
  }
  return {std::vector<ad::Var>(params.begin(), params.end())};
}

ad::Var EnergyClassifier::logits(ad::Tape& tape, const ClassifierTapeBinding& b,
                                 ad::Var x) const {
  check_dim(tape.size(x));
  const auto& p = b.params;
  const ad::Var h1 = tape.tanh(affine(tape, p[kW1], p[kB1], x));
  const ad::Var h2 = tape.tanh(affine(tape, p[kW2], p[kB2], h1));
  return affine(tape, p[kW3], p[kB3], h2);
}

ad::Var EnergyClassifier::phi(ad::Tape& tape, const ClassifierTapeBinding& b,
                              ad::Var e) const {
  const auto& p = b.params;
  const ad::Var h = tape.tanh(affine(tape, p[kPhiW1], p[kPhiB1], e));
  return affine(tape, p[kPhiW2], p[kPhiB2], h);
}

void EnergyClassifier::save(std::ostream& out) const {
  out << "format " << kFormat << '\n';
  out << "schema_version " << kSchemaVersion << '\n';
  out << "dim " << config_.dim << '\n';
  out << "class_count " << config_.class_count << '\n';
  out << "hidden_width " << config_.hidden_width << '\n';
  out << "phi_width " << config_.phi_width << '\n';
  out << "seed " << config_.seed << '\n';
  out << "param_count " << params_.size() << '\n';
  params_.write(out);
  out << "end\n";
}

EnergyClassifier EnergyClassifier::load(std::istream& in) {
  text::RecordReader reader(in);
  reader.expect_schema(kFormat, kSchemaVersion);
  auto read_count = [&](const std::string& key) {
    const auto v = reader.expect_int(key);
    if (v < 0) throw LoadError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
  };
  ClassifierConfig config;
  config.dim = read_count("dim");
  config.class_count = read_count("class_count");
  config.hidden_width = read_count("hidden_width");
  config.phi_width = read_count("phi_width");
  const auto seed_tokens = reader.expect("seed");
  if (seed_tokens.size() != 1) throw LoadError("seed", "expected one value");
  try {
    config.seed = std::stoull(std::string(seed_tokens[0]));
  } catch (const std::exception&) {
    throw LoadError("seed", "not an unsigned integer");
  }
  EnergyClassifier c;
  try {
    c = build(config);
  } catch (const ContractError& e) {
    throw LoadError("dim", e.what());
  }
  const std::size_t count = read_count("param_count");
  if (count != kBlockCount) throw LoadError("param_count", "expected 10 blocks");
  ParameterSet params = ParameterSet::read(in, count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& want = c.params_[i];
    if (params[i].name != want.name || params[i].rows != want.rows ||
        params[i].cols != want.cols) {
      throw LoadError(params[i].name, "parameter does not match model layout");
    }
  }
  reader.expect("end");
  c.params_ = std::move(params);
  return c;
}

std::string EnergyClassifier::to_string() const {
  std::ostringstream out;
  save(out);
  return out.str();
}

EnergyClassifier EnergyClassifier::from_string(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

double energy(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("energy: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return -(m + std::log(s));
}

ad::Var energy(ad::Tape& tape, ad::Var logits) {
  return tape.scale(tape.log_sum_exp(logits), -1.0);
}

namespace {

void check_batches(std::span<const std::vector<double>> id_batch,
                   std::span<const std::vector<double>> ood_batch) {
  if (id_batch.empty()) throw ContractError("ood loss: empty ID batch");
  if (ood_batch.empty()) throw ContractError("ood loss: empty OOD batch");
}

// Sums `terms` and divides by their count.
ad::Var tape_mean(ad::Tape& tape, const std::vector<ad::Var>& terms) {
  ad::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  return tape.scale(total, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

LossVars total_loss(ad::Tape& tape, const EnergyClassifier& classifier,
                    const ClassifierTapeBinding& binding,
                    std::span<const std::vector<double>> id_batch,
                    std::span<const std::size_t> id_labels,
                    std::span<const std::vector<double>> ood_batch, double beta,
                    bool with_ood) {
  if (id_batch.empty()) throw ContractError("total_loss: empty ID batch");
  if (id_batch.size() != id_labels.size()) {
    throw ContractError("total_loss: ID batch and labels differ in length");
  }
  if (!(beta >= 0.0)) throw ContractError("total_loss: beta must be >= 0");
  const bool need_ood = with_ood || beta > 0.0;
  if (need_ood && ood_batch.empty()) throw ContractError("total_loss: empty OOD batch");

  std::vector<ad::Var> ce_terms, id_terms, ood_terms;
  for (std::size_t i = 0; i < id_batch.size(); ++i) {
    if (id_labels[i] >= classifier.class_count()) {
      throw ContractError("total_loss: label " + std::to_string(id_labels[i]) +
                          " out of range");
    }
    const ad::Var z = classifier.logits(tape, binding, tape.input(id_batch[i]));
    const ad::Var lse = tape.log_sum_exp(z);
    ce_terms.push_back(tape.sub(lse, tape.slice(z, id_labels[i], 1)));
    if (need_ood) {
      const ad::Var s = classifier.phi(tape, binding, tape.scale(lse, -1.0));
      id_terms.push_back(tape.scale(tape.log_sigmoid(s), -1.0));
    }
  }
  LossVars vars;
  vars.cross_entropy = tape_mean(tape, ce_terms);
  vars.total = vars.cross_entropy;
  if (!need_ood) return vars;
  for (const auto& x : ood_batch) {
    const ad::Var z = classifier.logits(tape, binding, tape.input(x));
    const ad::Var s = classifier.phi(tape, binding, energy(tape, z));
    ood_terms.push_back(tape.scale(tape.log_sigmoid(tape.scale(s, -1.0)), -1.0));
  }
  vars.ood = tape.add(tape_mean(tape, ood_terms), tape_mean(tape, id_terms));
  vars.has_ood = true;
  if (beta > 0.0) vars.total = tape.add(vars.cross_entropy, tape.scale(vars.ood, beta));
  return vars;
}

double ood_regularization_loss(const EnergyClassifier& classifier,
                               std::span<const std::vector<double>> id_batch,
                               std::span<const std::vector<double>> ood_batch) {
  check_batches(id_batch, ood_batch);
  const std::vector<std::size_t> labels(id_batch.size(), 0);
  ad::Tape tape;
  const auto binding = classifier.bind(tape);
  const LossVars vars =
      total_loss(tape, classifier, binding, id_batch, labels, ood_batch, 0.0, true);
  return tape.scalar_value(vars.ood);
}

RegularizedLossReport total_loss(const EnergyClassifier& classifier,
                                 std::span<const std::vector<double>> id_batch,
                                 std::span<const std::size_t> id_labels,
                                 std::span<const std::vector<double>> ood_batch,
                                 double beta) {
  check_batches(id_batch, ood_batch);
  ad::Tape tape;
  const auto binding = classifier.bind(tape);
  const LossVars vars = total_loss(tape, classifier, binding, id_batch, id_labels,
                                   ood_batch, beta, true);
  RegularizedLossReport r;
  r.total = tape.scalar_value(vars.total);
  r.cross_entropy = tape.scalar_value(vars.cross_entropy);
  r.ood = tape.scalar_value(vars.ood);
  std::vector<double> id_e, ood_e;
  for (const auto& x : id_batch) id_e.push_back(classifier.energy(x));
  for (const auto& x : ood_batch) ood_e.push_back(classifier.energy(x));
  r.mean_id_energy = mean(id_e);
  r.mean_ood_energy = mean(ood_e);
  return r;
}

ad::ValueAndGradient total_loss_and_grad(
    const EnergyClassifier& classifier,
    std::span<const std::vector<double>> id_batch,
    std::span<const std::size_t> id_labels,
    std::span<const std::vector<double>> ood_batch, double beta) {
  ad::Tape tape;
  const auto binding = classifier.bind(tape);
  const LossVars vars = total_loss(tape, classifier, binding, id_batch, id_labels,
                                   ood_batch, beta, false);
  tape.backward(vars.total);
  ad::ValueAndGradient out;
  out.value = tape.scalar_value(vars.total);
  for (const auto& p : binding.params) {
    const auto g = tape.grad(p);
    out.gradient.emplace_back(g.begin(), g.end());
  }
  return out;
}

double ood_score(const EnergyClassifier& classifier, std::span<const double> x) {
  return classifier.score(x);
}

double energy_score(const EnergyClassifier& classifier, std::span<const double> x) {
  return -classifier.energy(x);
}

void ClassifierTrainConfig::validate() const {
  if (epochs == 0) throw ContractError("classifier: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractError("classifier: learning rate must be > 0");
  if (batch_size == 0) throw ContractError("classifier: batch size must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ContractError("classifier: beta must be >= 0");
  }
}

ClassifierTrainResult train_energy_classifier(const LabeledEmbeddingSet& id_data,
                                              const OutlierSet& outliers,
                                              const ClassifierTrainConfig& config) {
  config.validate();
  const LabeledEmbeddingSet train = id_data.subset(Split::kTrain);
  train.validate(1);
  if (outliers.empty()) throw ContractError("train_energy_classifier: no outliers");
  if (outliers.dim != train.dim) {
    throw ContractError("train_energy_classifier: outlier dimension differs from data");
  }
  ClassifierConfig cc;
  cc.dim = train.dim;
  cc.class_count = train.class_count;
  cc.hidden_width = config.hidden_width;
  cc.phi_width = config.phi_width;
  cc.seed = config.seed;
  ClassifierTrainResult result{EnergyClassifier::build(cc), {}};
  EnergyClassifier& clf = result.classifier;
  AdamOptimizer adam(clf.parameters(), {.learning_rate = config.learning_rate});

  Rng rng(derive_seed(config.seed, 0x747261696e));
  std::vector<std::size_t> id_order(train.size()), ood_order(outliers.size());
  std::iota(id_order.begin(), id_order.end(), 0);
  std::iota(ood_order.begin(), ood_order.end(), 0);
  std::shuffle(ood_order.begin(), ood_order.end(), rng);
  std::size_t ood_pos = 0;

  ad::Tape tape;
  std::vector<std::vector<double>> id_batch, ood_batch;
  std::vector<std::size_t> id_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(id_order.begin(), id_order.end(), rng);
    for (std::size_t start = 0; start < id_order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, id_order.size());
      id_batch.clear();
      id_labels.clear();
      ood_batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        id_batch.push_back(train.embeddings[id_order[i]]);
        id_labels.push_back(train.labels[id_order[i]]);
        if (ood_pos == ood_order.size()) {
          std::shuffle(ood_order.begin(), ood_order.end(), rng);
          ood_pos = 0;
        }
        ood_batch.push_back(outliers.embeddings[ood_order[ood_pos++]]);
      }
      tape.clear();
      ad::Gradient grad;
      try {
        const auto binding = clf.bind(tape);
        const LossVars vars = total_loss(tape, clf, binding, id_batch, id_labels,
                                         ood_batch, config.beta, false);
        tape.backward(vars.total);
        result.loss_history.push_back(tape.scalar_value(vars.total));
        for (const auto& p : binding.params) {
          const auto g = tape.grad(p);
          grad.emplace_back(g.begin(), g.end());
        }
      } catch (const NumericError& e) {
        throw NumericError("train_energy_classifier: epoch " + std::to_string(epoch) +
                           ": " + e.what());
      }
      adam.step(clf.mutable_parameters(), grad);
    }
  }
  return result;
}

double classification_accuracy(const EnergyClassifier& classifier,
                               const LabeledEmbeddingSet& data) {
  if (data.empty()) throw ContractError("classification_accuracy: empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = classifier.logits(data.embeddings[i]);
    const auto best = static_cast<std::size_t>(
        std::max_element(z.begin(), z.end()) - z.begin());
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string write_score_csv(std::span<const ScoreRecord> records) {
  std::ostringstream out;
  out << "index,tag,score,energy\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << i << ',' << records[i].tag << ',' << text::format_double(records[i].score)
        << ',' << text::format_double(records[i].energy) << '\n';
  }
  return out.str();
}

}  // namespace ncis
