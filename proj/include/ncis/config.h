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

#ifndef NCIS_CONFIG_H_
#define NCIS_CONFIG_H_

// Run configuration.
//
// Grammar, one entry per line:
//
//   # comment
//   density.lambda = 1e-5     # trailing comments are allowed
//
// Keys are dotted and namespaced per stage; `p`, `lambda`, `q`, `beta` are
// accepted as short forms of their namespaced keys. Every key can be
// overridden from the environment as NCIS_<KEY> with dots replaced by
// underscores and letters upper-cased (NCIS_DENSITY_LAMBDA, NCIS_SEED).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ncis {

struct RunConfig {
  std::uint64_t seed = 0;

  // Input data: "toy" generates the three-arc benchmark, "csv" ingests
  // externally produced embeddings.
  std::string data_source = "toy";
  std::string data_train_csv;
  std::string data_held_out_csv;
  std::string data_ood_csv;

  std::size_t toy_n_per_class = 200;
  std::size_t toy_held_out_per_class = 200;
  std::size_t toy_ood_count = 600;
  double toy_noise = 0.05;
  double toy_margin = 0.3;

  double p = 2.0;           // variance percent for the invariant count
  std::size_t k = 0;        // 0 selects K from p

  double cvpn_learning_rate = 1e-3;
  std::size_t cvpn_iterations = 5000;
  std::size_t cvpn_batch_size = 128;
  std::size_t cvpn_num_blocks = 4;
  std::size_t cvpn_hidden_width = 32;

  double lambda = 1e-5;

  double q = 0.05;
  std::size_t outliers_per_class = 1000;
  std::size_t outliers_max_attempts = 0;  // 0 = default budget

  double beta = 1.0;
  std::size_t classifier_epochs = 1000;
  double classifier_learning_rate = 3e-3;
  std::size_t classifier_batch_size = 64;
  std::size_t classifier_hidden_width = 64;
  std::size_t classifier_phi_width = 8;

  double eval_tpr_level = 0.95;

  std::vector<double> sweep_lambdas = {1e-6, 1e-5, 1e-4, 1e-3};
  std::size_t sweep_magnitude_per_class = 5000;
};

// Returns the value of an environment variable, if set.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Reads the process environment.
EnvLookup process_environment();

// Throws ParseError (with the 1-based line for file entries) on unknown keys,
// malformed values and out-of-range values.
RunConfig parse_config(const std::string& text);
RunConfig parse_config(const std::string& text, const EnvLookup& env);

// Sets one key from its textual value; throws ParseError without a line.
void set_config_value(RunConfig& config, const std::string& key,
                      const std::string& value);

// Canonical key names in stage order.
std::vector<std::string> config_keys();

// "key = value" for every non-empty key in config_keys() order. Parsing the result
// gives back the same config.
std::string canonical_config(const RunConfig& config);

// Pipeline stages, in execution order.
enum class Stage : int {
  kEmbed,
  kTrainCvpn,
  kFitDensity,
  kSampleOutliers,
  kTrainClassifier,
  kEvaluate,
};
inline constexpr int kStageCount = 6;
const char* stage_name(Stage stage);

// Hash of the keys that can influence `stage` (its own and all upstream).
std::uint64_t stage_config_hash(const RunConfig& config, Stage stage);

}  // namespace ncis

#endif  // NCIS_CONFIG_H_
