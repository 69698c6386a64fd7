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

#ifndef NCIS_PARAMETERS_H_
#define NCIS_PARAMETERS_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ncis {

// A named dense parameter block, row-major.
struct Parameter {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const Parameter&) const = default;
};

// Ordered collection of parameter blocks. The position of a block is its
// identifier for gradients and optimizer state.
class ParameterSet {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);
  std::size_t add(std::string name, std::size_t rows, std::size_t cols,
                  std::vector<double> values);

  std::size_t size() const { return blocks_.size(); }
  std::size_t total_size() const;
  const Parameter& operator[](std::size_t i) const { return blocks_[i]; }
  Parameter& operator[](std::size_t i) { return blocks_[i]; }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  // Throws ContractError when absent.
  std::size_t index_of(std::string_view name) const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  // "param <name> <rows> <cols>" followed by one line per row.
  void write(std::ostream& out) const;
  // Reads `count` blocks written by write().
  static ParameterSet read(std::istream& in, std::size_t count);

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<Parameter> blocks_;
};

}  // namespace ncis

#endif  // NCIS_PARAMETERS_H_
