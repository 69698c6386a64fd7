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

#ifndef NCIS_PIPELINE_H_
#define NCIS_PIPELINE_H_

// Stage orchestration over an artifact directory.
//
//   embed             -> embeddings_train.csv, embeddings_held_out.csv,
//                        ood_test.csv (when an OOD set is available)
//   train-cvpn        -> cvpn.model, cvpn_loss.csv
//   fit-density       -> density.bank
//   sample-outliers   -> outliers.csv
//   train-classifier  -> classifier.model, classifier_loss.csv
//   evaluate          -> metrics.csv, scores.csv
//
// manifest.txt records, per artifact, the producing stage, the hash of the
// config keys that stage depends on, and the FNV-1a hash of the file. A stage
// whose outputs all match is skipped; an output or input that exists but does
// not match is refused rather than reused or overwritten.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncis/config.h"
#include "ncis/evalharness.h"

namespace ncis {

// A stage failed; what() starts with "stage <name>: ".
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(std::string("stage ") + stage_name(stage) + ": " + what),
        stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct ManifestEntry {
  std::string stage;
  std::uint64_t config_hash = 0;
  std::string file;
  std::uint64_t content_hash = 0;
};

struct Manifest {
  static constexpr std::int64_t kSchemaVersion = 1;

  std::uint64_t config_hash = 0;  // whole canonical config
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& file) const;
  void put(ManifestEntry entry);

  std::string to_string() const;
  static Manifest from_string(const std::string& text);
};

// "index,e0,e1,..." for unlabeled points.
std::string write_point_csv(const std::vector<std::vector<double>>& points);
std::vector<std::vector<double>> read_point_csv(const std::string& csv);

class Pipeline {
 public:
  // Creates `out_dir` when missing and loads its manifest, if any.
  Pipeline(RunConfig config, std::string out_dir);

  const RunConfig& config() const { return config_; }
  const std::string& out_dir() const { return out_dir_; }
  const Manifest& manifest() const { return manifest_; }
  std::string path(const std::string& file) const;

  // Runs the stage unless its outputs are up to date. Returns true when it
  // ran. Throws StageError.
  bool run_stage(Stage stage);
  // All stages in order.
  void run_all();

  bool up_to_date(Stage stage) const;

  // Copies the outputs of `stage` from another directory whose manifest
  // records them under the same stage config hash.
  void import_stage(const Pipeline& from, Stage stage);

  // Human-readable progress lines ("ran embed", "skipped embed").
  const std::vector<std::string>& log() const { return log_; }

 private:
  std::vector<std::string> outputs(Stage stage) const;
  std::vector<std::string> inputs(Stage stage) const;
  void check_inputs(Stage stage) const;
  void check_outputs_writable(Stage stage) const;
  void record(Stage stage, const std::string& file);
  void save_manifest() const;
  void execute(Stage stage);

  RunConfig config_;
  std::string out_dir_;
  Manifest manifest_;
  std::vector<std::string> log_;
};

// Reads a config file (empty path = defaults) and applies NCIS_ overrides.
RunConfig load_config_file(const std::string& path);

// Reads the single metrics row written by the evaluate stage.
MetricsRow read_metrics_row(const std::string& csv);

struct SweepRow {
  MetricsRow metrics;
  double lambda = 0.0;
  double outlier_magnitude = 0.0;
};

// Shares embed and train-cvpn across lambdas; each lambda runs the remaining
// stages in out_dir/lambda_<value>. The magnitude column is the mean
// invariant norm of sweep_magnitude_per_class fresh outliers per class.
// Writes out_dir/sweep.csv.
std::vector<SweepRow> sweep_lambda(const RunConfig& config,
                                   const std::string& out_dir);

// "dataset,method,fpr95,auroc,accuracy,lambda,outlier_magnitude".
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ncis

#endif  // NCIS_PIPELINE_H_
