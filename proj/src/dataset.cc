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

#include "ncis/dataset.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/text_io.h"

namespace ncis {

void LabeledEmbeddingSet::add(std::vector<double> e, std::size_t label,
                              Split split) {
  if (dim == 0 && embeddings.empty()) dim = e.size();
  if (e.size() != dim) {
    throw ContractError("embedding set: expected dimension " +
                        std::to_string(dim) + ", got " + std::to_string(e.size()));
  }
  embeddings.push_back(std::move(e));
  labels.push_back(label);
  splits.push_back(split);
  class_count = std::max(class_count, label + 1);
}

LabeledEmbeddingSet LabeledEmbeddingSet::subset(Split split) const {
  LabeledEmbeddingSet out;
  out.dim = dim;
  out.class_count = class_count;
  for (std::size_t i = 0; i < size(); ++i) {
    if (splits[i] == split) {
      out.embeddings.push_back(embeddings[i]);
      out.labels.push_back(labels[i]);
      out.splits.push_back(split);
    }
  }
  return out;
}

std::vector<std::size_t> LabeledEmbeddingSet::class_counts() const {
  std::vector<std::size_t> counts(class_count, 0);
  for (auto l : labels) {
    if (l < class_count) ++counts[l];
  }
  return counts;
}

std::vector<std::vector<double>> LabeledEmbeddingSet::of_class(
    std::size_t label) const {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] == label) out.push_back(embeddings[i]);
  }
  return out;
}

void LabeledEmbeddingSet::validate(std::size_t min_per_class) const {
  if (labels.size() != embeddings.size() || splits.size() != embeddings.size()) {
    throw ContractError("embedding set: column lengths differ");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (embeddings[i].size() != dim) {
      throw ContractError("embedding set: row " + std::to_string(i) +
                          " has wrong dimension");
    }
    if (labels[i] >= class_count) {
      throw ContractError("embedding set: row " + std::to_string(i) +
                          " has label " + std::to_string(labels[i]) +
                          " >= class_count");
    }
    for (double x : embeddings[i]) {
      if (!std::isfinite(x)) {
        throw ContractError("embedding set: row " + std::to_string(i) +
                            " has a non-finite coordinate");
      }
    }
  }
  if (min_per_class > 0) {
    const auto counts = class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] < min_per_class) {
        throw ContractError("embedding set: class " + std::to_string(c) +
                            " has " + std::to_string(counts[c]) +
                            " points, need at least " +
                            std::to_string(min_per_class));
      }
    }
  }
}

std::string write_embedding_csv(const LabeledEmbeddingSet& set) {
  std::ostringstream out;
  out << "index,label";
  for (std::size_t j = 0; j < set.dim; ++j) out << ",e" << j;
  out << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << i << ',' << set.labels[i] << ','
        << text::join_doubles(set.embeddings[i], ',') << '\n';
  }
  return out.str();
}

LabeledEmbeddingSet read_embedding_csv(const std::string& csv,
                                       std::size_t class_count, Split split) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("header", "empty embedding CSV");
  const auto header = text::split(line, ',');
  if (header.size() < 2 || header[0] != "index" || header[1] != "label") {
    throw LoadError("header", "expected 'index,label,e0,...'");
  }
  LabeledEmbeddingSet set;
  set.dim = header.size() - 2;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = text::split(line, ',');
    const std::string field = "row " + std::to_string(row);
    if (cells.size() != header.size()) {
      throw LoadError(field, "expected " + std::to_string(header.size()) +
                                 " columns");
    }
    const auto label = text::parse_int(cells[1], field + ".label");
    if (label < 0) throw LoadError(field + ".label", "negative label");
    std::vector<double> e;
    e.reserve(set.dim);
    for (std::size_t j = 2; j < cells.size(); ++j) {
      e.push_back(text::parse_double(cells[j], field));
    }
    set.add(std::move(e), static_cast<std::size_t>(label), split);
    ++row;
  }
  if (class_count > 0) {
    if (set.class_count > class_count) {
      throw LoadError("label", "label exceeds class_count");
    }
    set.class_count = class_count;
  }
  return set;
}

}  // namespace ncis
