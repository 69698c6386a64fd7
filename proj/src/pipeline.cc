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

#include "ncis/pipeline.h"

#include <charconv>
#include <filesystem>
#include <sstream>

#include "ncis/cvpn.h"
#include "ncis/dataset.h"
#include "ncis/density.h"
#include "ncis/errors.h"
#include "ncis/invariant_training.h"
#include "ncis/ood_classifier.h"
#include "ncis/outlier_sampling.h"
#include "ncis/text_io.h"

namespace ncis {
namespace fs = std::filesystem;
namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kTrainCsv = "embeddings_train.csv";
constexpr const char* kHeldOutCsv = "embeddings_held_out.csv";
constexpr const char* kOodCsv = "ood_test.csv";
constexpr const char* kCvpnModel = "cvpn.model";
constexpr const char* kCvpnLoss = "cvpn_loss.csv";
constexpr const char* kDensityBank = "density.bank";
constexpr const char* kOutliersCsv = "outliers.csv";
constexpr const char* kClassifierModel = "classifier.model";
constexpr const char* kClassifierLoss = "classifier_loss.csv";
constexpr const char* kMetricsCsv = "metrics.csv";
constexpr const char* kScoresCsv = "scores.csv";
constexpr const char* kSweepCsv = "sweep.csv";

std::uint64_t parse_hex(std::string_view token, const std::string& field) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out, 16);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw LoadError(field, "expected a hex hash, got '" + std::string(token) + "'");
  }
  return out;
}

std::uint64_t file_hash(const std::string& path) {
  return text::fnv1a(text::read_file(path));
}

Stage stage_at(int i) { return static_cast<Stage>(i); }

}  // namespace

const ManifestEntry* Manifest::find(const std::string& file) const {
  for (const auto& e : entries) {
    if (e.file == file) return &e;
  }
  return nullptr;
}

void Manifest::put(ManifestEntry entry) {
  for (auto& e : entries) {
    if (e.file == entry.file) {
      e = std::move(entry);
      return;
    }
  }
  entries.push_back(std::move(entry));
}

std::string Manifest::to_string() const {
  std::ostringstream out;
  out << "format ncis-manifest\n";
  out << "schema_version " << kSchemaVersion << '\n';
  out << "config_hash " << text::hex64(config_hash) << '\n';
  out << "seed " << seed << '\n';
  out << "artifact_count " << entries.size() << '\n';
  for (const auto& e : entries) {
    out << "artifact " << e.stage << ' ' << text::hex64(e.config_hash) << ' ' << e.file
        << ' ' << text::hex64(e.content_hash) << '\n';
  }
  out << "end\n";
  return out.str();
}

Manifest Manifest::from_string(const std::string& text) {
  std::istringstream in(text);
  text::RecordReader reader(in);
  reader.expect_schema("ncis-manifest", kSchemaVersion);
  Manifest m;
  const auto hash = reader.expect("config_hash");
  if (hash.size() != 1) throw LoadError("config_hash", "expected one value");
  m.config_hash = parse_hex(hash[0], "config_hash");
  const auto seed = reader.expect_int("seed");
  m.seed = static_cast<std::uint64_t>(seed);
  const auto count = reader.expect_int("artifact_count");
  if (count < 0) throw LoadError("artifact_count", "negative");
  for (std::int64_t i = 0; i < count; ++i) {
    const auto t = reader.expect("artifact");
    if (t.size() != 4) throw LoadError("artifact", "expected 4 fields");
    m.entries.push_back({std::string(t[0]), parse_hex(t[1], "artifact"),
                         std::string(t[2]), parse_hex(t[3], "artifact")});
  }
  reader.expect("end");
  return m;
}

std::string write_point_csv(const std::vector<std::vector<double>>& points) {
  std::ostringstream out;
  out << "index";
  const std::size_t dim = points.empty() ? 0 : points.front().size();
  for (std::size_t j = 0; j < dim; ++j) out << ",e" << j;
  out << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << i << ',' << text::join_doubles(points[i], ',') << '\n';
  }
  return out.str();
}

std::vector<std::vector<double>> read_point_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("header", "empty point CSV");
  const auto header = text::split(line, ',');
  if (header.size() < 2 || header[0] != "index") {
    throw LoadError("header", "expected 'index,e0,...'");
  }
  std::vector<std::vector<double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    const std::string field = "row " + std::to_string(out.size());
    if (cells.size() != header.size()) throw LoadError(field, "wrong column count");
    std::vector<double> p;
    for (std::size_t j = 1; j < cells.size(); ++j) p.push_back(text::parse_double(cells[j], field));
    out.push_back(std::move(p));
  }
  return out;
}

Pipeline::Pipeline(RunConfig config, std::string out_dir)
    : config_(std::move(config)), out_dir_(std::move(out_dir)) {
  fs::create_directories(out_dir_);
  if (fs::exists(path(kManifestFile))) {
    manifest_ = Manifest::from_string(text::read_file(path(kManifestFile)));
  }
  manifest_.config_hash = text::fnv1a(canonical_config(config_));
  manifest_.seed = config_.seed;
}

std::string Pipeline::path(const std::string& file) const {
  return (fs::path(out_dir_) / file).string();
}

std::vector<std::string> Pipeline::outputs(Stage stage) const {
  switch (stage) {
    case Stage::kEmbed: {
      std::vector<std::string> out = {kTrainCsv, kHeldOutCsv};
      if (config_.data_source == "toy" || !config_.data_ood_csv.empty()) {
        out.push_back(kOodCsv);
      }
      return out;
    }
    case Stage::kTrainCvpn: return {kCvpnModel, kCvpnLoss};
    case Stage::kFitDensity: return {kDensityBank};
    case Stage::kSampleOutliers: return {kOutliersCsv};
    case Stage::kTrainClassifier: return {kClassifierModel, kClassifierLoss};
    case Stage::kEvaluate: return {kMetricsCsv, kScoresCsv};
  }
  return {};
}

std::vector<std::string> Pipeline::inputs(Stage stage) const {
  switch (stage) {
    case Stage::kEmbed: return {};
    case Stage::kTrainCvpn: return {kTrainCsv, kHeldOutCsv};
    case Stage::kFitDensity: return {kTrainCsv, kCvpnModel};
    case Stage::kSampleOutliers: return {kCvpnModel, kDensityBank};
    case Stage::kTrainClassifier: return {kTrainCsv, kOutliersCsv};
    case Stage::kEvaluate: return {kClassifierModel, kHeldOutCsv, kOodCsv};
  }
  return {};
}

bool Pipeline::up_to_date(Stage stage) const {
  const std::uint64_t want = stage_config_hash(config_, stage);
  for (const auto& file : outputs(stage)) {
    const ManifestEntry* e = manifest_.find(file);
    if (!e || !fs::exists(path(file))) return false;
    if (e->stage != stage_name(stage) || e->config_hash != want) return false;
    if (e->content_hash != file_hash(path(file))) return false;
  }
  return true;
}

void Pipeline::check_inputs(Stage stage) const {
  for (const auto& file : inputs(stage)) {
    if (!fs::exists(path(file))) {
      throw StageError(stage, "missing input " + file + "; run the stage that produces it first");
    }
    const ManifestEntry* e = manifest_.find(file);
    if (!e) throw StageError(stage, "input " + file + " is not recorded in the manifest");
    if (e->content_hash != file_hash(path(file))) {
      throw StageError(stage, "input " + file + " does not match its manifest hash; refusing to use it");
    }
    // An upstream artifact produced under different settings is stale.
    for (int s = 0; s < kStageCount; ++s) {
      if (e->stage == stage_name(stage_at(s)) &&
          e->config_hash != stage_config_hash(config_, stage_at(s))) {
        throw StageError(stage, "input " + file + " was produced with a different config; refusing to use it");
      }
    }
  }
}

void Pipeline::check_outputs_writable(Stage stage) const {
  for (const auto& file : outputs(stage)) {
    if (fs::exists(path(file))) {
      throw StageError(stage, "stale artifact " + file +
                                  " exists and does not match the manifest for this config; "
                                  "remove it or use another output directory");
    }
  }
}

void Pipeline::record(Stage stage, const std::string& file) {
  manifest_.put({stage_name(stage), stage_config_hash(config_, stage), file,
                 file_hash(path(file))});
}

void Pipeline::save_manifest() const {
  text::write_file(path(kManifestFile), manifest_.to_string());
}

bool Pipeline::run_stage(Stage stage) {
  if (up_to_date(stage)) {
    check_inputs(stage);
    log_.push_back(std::string("skipped ") + stage_name(stage) + " (up to date)");
    return false;
  }
  check_inputs(stage);
  check_outputs_writable(stage);
  try {
    execute(stage);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  for (const auto& file : outputs(stage)) record(stage, file);
  save_manifest();
  log_.push_back(std::string("ran ") + stage_name(stage));
  return true;
}

void Pipeline::run_all() {
  for (int s = 0; s < kStageCount; ++s) run_stage(stage_at(s));
}

void Pipeline::import_stage(const Pipeline& from, Stage stage) {
  if (up_to_date(stage)) return;
  if (!from.up_to_date(stage)) {
    throw StageError(stage, "cannot import from " + from.out_dir() + ": not up to date there");
  }
  if (stage_config_hash(from.config(), stage) != stage_config_hash(config_, stage)) {
    throw StageError(stage, "cannot import from " + from.out_dir() + ": config differs");
  }
  check_outputs_writable(stage);
  for (const auto& file : outputs(stage)) {
    fs::copy_file(from.path(file), path(file));
    record(stage, file);
  }
  save_manifest();
  log_.push_back(std::string("imported ") + stage_name(stage) + " from " + from.out_dir());
}

void Pipeline::execute(Stage stage) {
  auto load_data = [&] {
    auto data = read_embedding_csv(text::read_file(path(kTrainCsv)));
    const auto held =
        read_embedding_csv(text::read_file(path(kHeldOutCsv)), 0, Split::kHeldOut);
    if (held.dim != data.dim) throw ContractError("held-out embeddings differ in dimension");
    for (std::size_t i = 0; i < held.size(); ++i) {
      data.add(held.embeddings[i], held.labels[i], Split::kHeldOut);
    }
    return data;
  };
  auto load_model = [&] {
    return CvpnModel::from_string(text::read_file(path(kCvpnModel)));
  };

  switch (stage) {
    case Stage::kEmbed: {
      // Embeddings are ingested as given; the toy source uses its 2-D points
      // directly as embeddings.
      LabeledEmbeddingSet train, held;
      std::vector<std::vector<double>> ood;
      bool have_ood = false;
      if (config_.data_source == "toy") {
        ToyBenchmarkOptions options;
        options.held_out_per_class = config_.toy_held_out_per_class;
        options.ood_count = config_.toy_ood_count;
        options.margin = config_.toy_margin;
        const auto bench = make_toy_benchmark(config_.seed, config_.toy_n_per_class,
                                              config_.toy_noise, options);
        train = bench.train;
        held = bench.held_out;
        ood = bench.ood;
        have_ood = true;
      } else {
        train = read_embedding_csv(text::read_file(config_.data_train_csv));
        held = read_embedding_csv(text::read_file(config_.data_held_out_csv),
                                  train.class_count, Split::kHeldOut);
        if (!config_.data_ood_csv.empty()) {
          ood = read_point_csv(text::read_file(config_.data_ood_csv));
          have_ood = true;
        }
      }
      train.validate(2);
      held.validate();
      if (held.dim != train.dim) throw ContractError("held-out embeddings differ in dimension");
      text::write_file(path(kTrainCsv), write_embedding_csv(train));
      text::write_file(path(kHeldOutCsv), write_embedding_csv(held));
      if (have_ood) {
        for (const auto& p : ood) {
          if (p.size() != train.dim) throw ContractError("OOD points differ in dimension");
        }
        text::write_file(path(kOodCsv), write_point_csv(ood));
      }
      return;
    }
    case Stage::kTrainCvpn: {
      const auto data = load_data();
      const auto train = data.subset(Split::kTrain);
      std::size_t k = config_.k;
      if (k == 0) {
        const auto selection = select_num_invariants(train, config_.p);
        for (const auto& w : selection.warnings) log_.push_back("warning: " + w);
        k = selection.k;
      }
      log_.push_back("invariants K = " + std::to_string(k));
      CvpnConfig mc;
      mc.dim = data.dim;
      mc.num_invariants = k;
      mc.num_blocks = config_.cvpn_num_blocks;
      mc.class_count = data.class_count;
      mc.hidden_width = config_.cvpn_hidden_width;
      mc.seed = config_.seed;
      TrainConfig tc;
      tc.learning_rate = config_.cvpn_learning_rate;
      tc.iterations = config_.cvpn_iterations;
      tc.batch_size = config_.cvpn_batch_size;
      tc.seed = config_.seed;
      tc.variance_percent = config_.p;
      tc.num_blocks = config_.cvpn_num_blocks;
      tc.hidden_width = config_.cvpn_hidden_width;
      const auto result = train_cvpn(CvpnModel::build(mc), data, tc);
      text::write_file(path(kCvpnModel), result.model.to_string());
      text::write_file(path(kCvpnLoss), loss_history_csv(result.loss_history));
      return;
    }
    case Stage::kFitDensity: {
      const auto data = read_embedding_csv(text::read_file(path(kTrainCsv)));
      const auto model = load_model();
      const auto bank = fit_class_gaussians(model, data, config_.lambda);
      text::write_file(path(kDensityBank), bank.to_string());
      return;
    }
    case Stage::kSampleOutliers: {
      const auto model = load_model();
      const auto bank =
          ClassGaussianBank::from_string(text::read_file(path(kDensityBank)));
      const auto set =
          synthesize_outliers(model, bank, config_.outliers_per_class, config_.q,
                              config_.outliers_max_attempts, config_.seed);
      text::write_file(path(kOutliersCsv), write_outlier_csv(set));
      return;
    }
    case Stage::kTrainClassifier: {
      const auto data = read_embedding_csv(text::read_file(path(kTrainCsv)));
      const auto outliers = read_outlier_csv(text::read_file(path(kOutliersCsv)));
      ClassifierTrainConfig cc;
      cc.epochs = config_.classifier_epochs;
      cc.learning_rate = config_.classifier_learning_rate;
      cc.batch_size = config_.classifier_batch_size;
      cc.beta = config_.beta;
      cc.seed = config_.seed;
      cc.hidden_width = config_.classifier_hidden_width;
      cc.phi_width = config_.classifier_phi_width;
      const auto result = train_energy_classifier(data, outliers, cc);
      text::write_file(path(kClassifierModel), result.classifier.to_string());
      text::write_file(path(kClassifierLoss), loss_history_csv(result.loss_history));
      return;
    }
    case Stage::kEvaluate: {
      const auto clf =
          EnergyClassifier::from_string(text::read_file(path(kClassifierModel)));
      const auto held =
          read_embedding_csv(text::read_file(path(kHeldOutCsv)), clf.class_count(),
                             Split::kHeldOut);
      const auto ood = read_point_csv(text::read_file(path(kOodCsv)));
      // With beta = 0 phi never trains, so the baseline ranks by -E.
      const bool learned = config_.beta > 0.0;
      auto score = [&](const std::vector<double>& x) {
        return learned ? ood_score(clf, x) : energy_score(clf, x);
      };
      std::vector<ScoreRecord> records;
      std::vector<double> id_scores, ood_scores;
      for (std::size_t i = 0; i < held.size(); ++i) {
        const double s = score(held.embeddings[i]);
        id_scores.push_back(s);
        records.push_back({std::to_string(held.labels[i]), s, clf.energy(held.embeddings[i])});
      }
      for (const auto& x : ood) {
        const double s = score(x);
        ood_scores.push_back(s);
        records.push_back({"ood", s, clf.energy(x)});
      }
      const auto samples = make_score_samples(id_scores, ood_scores);
      MetricsRow row;
      row.dataset = config_.data_source;
      row.method = learned ? "ncis" : "energy";
      row.fpr95 = fpr_at_tpr(samples, config_.eval_tpr_level);
      row.auroc = auroc(samples);
      row.accuracy = classification_accuracy(clf, held);
      const MetricsRow rows[] = {row};
      text::write_file(path(kMetricsCsv), metrics_csv(rows));
      text::write_file(path(kScoresCsv), write_score_csv(records));
      return;
    }
  }
}

RunConfig load_config_file(const std::string& path) {
  if (path.empty()) return parse_config("");
  return parse_config(text::read_file(path));
}

MetricsRow read_metrics_row(const std::string& csv) {
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  if (header != "dataset,method,fpr95,auroc,accuracy" || !std::getline(in, line)) {
    throw LoadError("metrics", "expected a header and one row");
  }
  const auto cells = text::split(line, ',');
  if (cells.size() != 5) throw LoadError("metrics", "expected 5 columns");
  MetricsRow row;
  row.dataset = std::string(cells[0]);
  row.method = std::string(cells[1]);
  row.fpr95 = text::parse_double(cells[2], "fpr95");
  row.auroc = text::parse_double(cells[3], "auroc");
  row.accuracy = text::parse_double(cells[4], "accuracy");
  return row;
}

std::vector<SweepRow> sweep_lambda(const RunConfig& config,
                                   const std::string& out_dir) {
  if (config.sweep_lambdas.empty()) throw ContractError("sweep: no lambdas");
  Pipeline base(config, out_dir);
  base.run_stage(Stage::kEmbed);
  base.run_stage(Stage::kTrainCvpn);
  std::vector<SweepRow> rows;
  for (double lambda : config.sweep_lambdas) {
    RunConfig c = config;
    c.lambda = lambda;
    Pipeline run(c, (fs::path(out_dir) / ("lambda_" + text::format_double(lambda))).string());
    run.import_stage(base, Stage::kEmbed);
    run.import_stage(base, Stage::kTrainCvpn);
    for (int s = static_cast<int>(Stage::kFitDensity); s < kStageCount; ++s) {
      run.run_stage(stage_at(s));
    }
    SweepRow row;
    row.lambda = lambda;
    row.metrics = read_metrics_row(text::read_file(run.path(kMetricsCsv)));
    const auto model = CvpnModel::from_string(text::read_file(run.path(kCvpnModel)));
    const auto bank =
        ClassGaussianBank::from_string(text::read_file(run.path(kDensityBank)));
    const auto probe = synthesize_outliers(model, bank, c.sweep_magnitude_per_class,
                                           c.q, 0, c.seed);
    row.outlier_magnitude = mean_invariant_magnitude(model, probe);
    rows.push_back(row);
  }
  text::write_file((fs::path(out_dir) / kSweepCsv).string(), sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "dataset,method,fpr95,auroc,accuracy,lambda,outlier_magnitude\n";
  for (const auto& r : rows) {
    out << r.metrics.dataset << ',' << r.metrics.method << ','
        << text::format_double(r.metrics.fpr95) << ','
        << text::format_double(r.metrics.auroc) << ','
        << text::format_double(r.metrics.accuracy) << ','
        << text::format_double(r.lambda) << ','
        << text::format_double(r.outlier_magnitude) << '\n';
  }
  return out.str();
}

}  // namespace ncis
