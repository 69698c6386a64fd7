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

#ifndef NCIS_EVALHARNESS_H_
#define NCIS_EVALHARNESS_H_

// OOD metrics with ID as the positive class, and a three-class 2-D toy
// benchmark of circular arcs.
//
// Threshold convention: score >= tau is predicted ID.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncis/dataset.h"

namespace ncis {

enum class Truth : unsigned char { kId, kOod };

struct ScoreSample {
  double score = 0.0;  // larger = more ID
  Truth truth = Truth::kId;
};

std::vector<ScoreSample> make_score_samples(std::span<const double> id_scores,
                                            std::span<const double> ood_scores);

// P(id score > ood score) + 0.5 P(tie). Throws ContractError unless both
// classes are present and all scores are finite.
double auroc(std::span<const ScoreSample> samples);

// tau is the largest threshold with (#ID >= tau) / #ID >= level; returns
// (#OOD >= tau) / #OOD.
double fpr_at_tpr(std::span<const ScoreSample> samples, double level = 0.95);

struct ToyArc {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 1.0;
  double theta_begin = 0.0;  // radians, theta_begin < theta_end
  double theta_end = 0.0;

  std::vector<double> point(double theta) const;
  // Euclidean distance from p to the arc.
  double distance(std::span<const double> p) const;
};

// The three arcs used by the benchmark, one per class.
std::vector<ToyArc> toy_arcs();

struct ToyBenchmarkOptions {
  std::size_t held_out_per_class = 200;
  std::size_t ood_count = 600;
  double margin = 0.3;
  double box_padding = 0.75;  // bounding box of the arcs grown by this much
};

struct ToyBenchmark {
  std::uint64_t seed = 0;
  double noise = 0.0;
  double margin = 0.0;
  std::vector<ToyArc> arcs;
  LabeledEmbeddingSet train;
  LabeledEmbeddingSet held_out;
  std::vector<std::vector<double>> ood;
  double box[4] = {0, 0, 0, 0};  // xmin, xmax, ymin, ymax

  // Training and held-out points in one set, tagged by split.
  LabeledEmbeddingSet combined() const;
  double distance_to_nearest_arc(std::span<const double> p) const;
};

// Points are arc(theta) plus N(0, noise^2) along the arc normal, with theta
// uniform over the arc. OOD points are uniform over the box and kept only
// when at least `margin` from every noiseless arc. Throws ContractError when
// noise >= margin.
ToyBenchmark make_toy_benchmark(std::uint64_t seed, std::size_t n_per_class,
                                double noise = 0.05,
                                const ToyBenchmarkOptions& options = {});

// "split,label,x0,x1" with split in {train, held_out, ood} and label "ood"
// for OOD rows.
std::string write_benchmark_csv(const ToyBenchmark& bench);

struct MetricsRow {
  std::string dataset;
  std::string method;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double accuracy = 0.0;
};

// "dataset,method,fpr95,auroc,accuracy".
std::string metrics_csv(std::span<const MetricsRow> rows);

}  // namespace ncis

#endif  // NCIS_EVALHARNESS_H_
