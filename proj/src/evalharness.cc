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

#include "ncis/evalharness.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/random.h"
#include "ncis/text_io.h"

namespace ncis {
namespace {

struct Counts {
  std::size_t id = 0;
  std::size_t ood = 0;
};

Counts check_samples(std::span<const ScoreSample> samples) {
  Counts c;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw ContractError("metrics: non-finite score");
    (s.truth == Truth::kId ? c.id : c.ood)++;
  }
  if (c.id == 0 || c.ood == 0) {
    throw ContractError("metrics: need at least one ID and one OOD sample");
  }
  return c;
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

}  // namespace

std::vector<ScoreSample> make_score_samples(std::span<const double> id_scores,
                                            std::span<const double> ood_scores) {
  std::vector<ScoreSample> out;
  out.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) out.push_back({s, Truth::kId});
  for (double s : ood_scores) out.push_back({s, Truth::kOod});
  return out;
}

double auroc(std::span<const ScoreSample> samples) {
  const Counts n = check_samples(samples);
  std::vector<ScoreSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoreSample& a, const ScoreSample& b) { return a.score < b.score; });
  // Mann-Whitney U over tie groups; every term is a half-integer, so the sum
  // is exact.
  double u = 0.0;
  std::size_t ood_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    Counts group;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].truth == Truth::kId ? group.id : group.ood)++;
      ++j;
    }
    u += static_cast<double>(group.id) * static_cast<double>(ood_below) +
         0.5 * static_cast<double>(group.id) * static_cast<double>(group.ood);
    ood_below += group.ood;
    i = j;
  }
  return u / (static_cast<double>(n.id) * static_cast<double>(n.ood));
}

double fpr_at_tpr(std::span<const ScoreSample> samples, double level) {
  const Counts n = check_samples(samples);
  if (!(level > 0.0 && level <= 1.0)) {
    throw ContractError("fpr_at_tpr: level must lie in (0, 1]");
  }
  std::vector<double> id, ood;
  for (const auto& s : samples) (s.truth == Truth::kId ? id : ood).push_back(s.score);
  std::sort(id.begin(), id.end(), std::greater<>());
  double tau = id.back();
  for (std::size_t i = 0; i < id.size();) {
    std::size_t j = i;
    while (j < id.size() && id[j] == id[i]) ++j;
    if (static_cast<double>(j) / static_cast<double>(n.id) >= level) {
      tau = id[i];
      break;
    }
    i = j;
  }
  const auto passed = std::count_if(ood.begin(), ood.end(),
                                    [tau](double s) { return s >= tau; });
  return static_cast<double>(passed) / static_cast<double>(n.ood);
}

std::vector<double> ToyArc::point(double theta) const {
  return {center_x + radius * std::cos(theta), center_y + radius * std::sin(theta)};
}

double ToyArc::distance(std::span<const double> p) const {
  if (p.size() != 2) throw ContractError("ToyArc::distance: expected a 2-D point");
  const double dx = p[0] - center_x, dy = p[1] - center_y;
  const double mid = 0.5 * (theta_begin + theta_end);
  const double half = 0.5 * (theta_end - theta_begin);
  if (std::abs(wrap_angle(std::atan2(dy, dx) - mid)) <= half) {
    return std::abs(std::hypot(dx, dy) - radius);
  }
  const auto a = point(theta_begin), b = point(theta_end);
  return std::min(std::hypot(p[0] - a[0], p[1] - a[1]),
                  std::hypot(p[0] - b[0], p[1] - b[1]));
}

std::vector<ToyArc> toy_arcs() {
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {
      {-2.5, 0.0, 1.5, -55.0 * kDeg, 55.0 * kDeg},
      {1.0, 0.0, 1.5, 125.0 * kDeg, 235.0 * kDeg},
      {1.5, 0.0, 1.2, -60.0 * kDeg, 60.0 * kDeg},
  };
}

LabeledEmbeddingSet ToyBenchmark::combined() const {
  LabeledEmbeddingSet out = train;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    out.add(held_out.embeddings[i], held_out.labels[i], Split::kHeldOut);
  }
  return out;
}

double ToyBenchmark::distance_to_nearest_arc(std::span<const double> p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& arc : arcs) best = std::min(best, arc.distance(p));
  return best;
}

ToyBenchmark make_toy_benchmark(std::uint64_t seed, std::size_t n_per_class,
                                double noise, const ToyBenchmarkOptions& options) {
  if (n_per_class == 0) throw ContractError("toy benchmark: n_per_class must be >= 1");
  if (!(noise >= 0.0)) throw ContractError("toy benchmark: noise must be >= 0");
  if (!(noise < options.margin)) {
    throw ContractError("toy benchmark: noise must be below the OOD margin");
  }
  ToyBenchmark bench;
  bench.seed = seed;
  bench.noise = noise;
  bench.margin = options.margin;
  bench.arcs = toy_arcs();
  bench.train.dim = bench.held_out.dim = 2;
  bench.train.class_count = bench.held_out.class_count = bench.arcs.size();

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_class = [&](std::size_t label, std::size_t count, Split split,
                          LabeledEmbeddingSet& into, Rng& rng) {
    const ToyArc& arc = bench.arcs[label];
    for (std::size_t i = 0; i < count; ++i) {
      const double theta =
          arc.theta_begin + unit(rng) * (arc.theta_end - arc.theta_begin);
      const double r = arc.radius + noise * normal(rng);
      into.add({arc.center_x + r * std::cos(theta), arc.center_y + r * std::sin(theta)},
               label, split);
    }
  };
  for (std::size_t label = 0; label < bench.arcs.size(); ++label) {
    Rng train_rng(derive_seed(seed, 2 * label));
    Rng held_rng(derive_seed(seed, 2 * label + 1));
    sample_class(label, n_per_class, Split::kTrain, bench.train, train_rng);
    sample_class(label, options.held_out_per_class, Split::kHeldOut, bench.held_out,
                 held_rng);
  }

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& arc : bench.arcs) {
    for (int k = 0; k <= 200; ++k) {
      const auto p = arc.point(arc.theta_begin +
                               (arc.theta_end - arc.theta_begin) * k / 200.0);
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, p[1]);
      ymax = std::max(ymax, p[1]);
    }
  }
  bench.box[0] = xmin - options.box_padding;
  bench.box[1] = xmax + options.box_padding;
  bench.box[2] = ymin - options.box_padding;
  bench.box[3] = ymax + options.box_padding;

  Rng ood_rng(derive_seed(seed, 0x6f6f64));
  std::uniform_real_distribution<double> ux(bench.box[0], bench.box[1]);
  std::uniform_real_distribution<double> uy(bench.box[2], bench.box[3]);
  while (bench.ood.size() < options.ood_count) {
    std::vector<double> p = {ux(ood_rng), uy(ood_rng)};
    if (bench.distance_to_nearest_arc(p) >= options.margin) {
      bench.ood.push_back(std::move(p));
    }
  }
  return bench;
}

std::string write_benchmark_csv(const ToyBenchmark& bench) {
  std::ostringstream out;
  out << "split,label,x0,x1\n";
  auto emit = [&](const LabeledEmbeddingSet& set, const char* split) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      out << split << ',' << set.labels[i] << ','
          << text::join_doubles(set.embeddings[i], ',') << '\n';
    }
  };
  emit(bench.train, "train");
  emit(bench.held_out, "held_out");
  for (const auto& p : bench.ood) out << "ood,ood," << text::join_doubles(p, ',') << '\n';
  return out.str();
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::ostringstream out;
  out << "dataset,method,fpr95,auroc,accuracy\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.method << ',' << text::format_double(r.fpr95) << ','
        << text::format_double(r.auroc) << ',' << text::format_double(r.accuracy)
        << '\n';
  }
  return out.str();
}

}  // namespace ncis
