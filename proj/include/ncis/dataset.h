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

#ifndef NCIS_DATASET_H_
#define NCIS_DATASET_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ncis {

enum class Split : unsigned char { kTrain, kHeldOut };

// Labeled points in the D-dimensional conditioning space.
struct LabeledEmbeddingSet {
  std::size_t dim = 0;
  std::size_t class_count = 0;
  std::vector<std::vector<double>> embeddings;
  std::vector<std::size_t> labels;
  std::vector<Split> splits;

  std::size_t size() const { return embeddings.size(); }
  bool empty() const { return embeddings.empty(); }
  void add(std::vector<double> e, std::size_t label, Split split = Split::kTrain);

  LabeledEmbeddingSet subset(Split split) const;
  std::vector<std::size_t> class_counts() const;
  // Points of one class, in order.
  std::vector<std::vector<double>> of_class(std::size_t label) const;

  // Checks dims, label range and finiteness; with `min_per_class` > 0 also
  // that every class has at least that many points. Throws ContractError.
  void validate(std::size_t min_per_class = 0) const;
};

// CSV with header "index,label,e0,e1,..."; rows in set order.
std::string write_embedding_csv(const LabeledEmbeddingSet& set);
// `class_count` of 0 infers max label + 1. Every row is tagged `split`.
LabeledEmbeddingSet read_embedding_csv(const std::string& csv,
                                       std::size_t class_count = 0,
                                       Split split = Split::kTrain);

}  // namespace ncis

#endif  // NCIS_DATASET_H_
