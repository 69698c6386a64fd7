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

#include "ncis/parameters.h"

#include <ostream>

#include "ncis/errors.h"
#include "ncis/text_io.h"

namespace ncis {

std::size_t ParameterSet::add(std::string name, std::size_t rows,
                              std::size_t cols) {
  return add(std::move(name), rows, cols, std::vector<double>(rows * cols));
}

std::size_t ParameterSet::add(std::string name, std::size_t rows,
                              std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw ContractError("parameter '" + name + "': value count " +
                        std::to_string(values.size()) + " != rows*cols");
  }
  blocks_.push_back({std::move(name), rows, cols, std::move(values)});
  return blocks_.size() - 1;
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : blocks_) n += p.size();
  return n;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_size());
  for (const auto& p : blocks_) {
    flat.insert(flat.end(), p.values.begin(), p.values.end());
  }
  return flat;
}

void ParameterSet::unflatten(std::span<const double> flat) {
  if (flat.size() != total_size()) {
    throw ContractError("unflatten: expected " + std::to_string(total_size()) +
                        " values, got " + std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto& p : blocks_) {
    std::copy(flat.begin() + offset, flat.begin() + offset + p.size(),
              p.values.begin());
    offset += p.size();
  }
}

void ParameterSet::write(std::ostream& out) const {
  for (const auto& p : blocks_) {
    out << "param " << p.name << ' ' << p.rows << ' ' << p.cols << '\n';
    for (std::size_t r = 0; r < p.rows; ++r) {
      out << text::join_doubles(
                 std::span<const double>(p.values).subspan(r * p.cols, p.cols))
          << '\n';
    }
  }
}

ParameterSet ParameterSet::read(std::istream& in, std::size_t count) {
  ParameterSet set;
  text::RecordReader reader(in);
  for (std::size_t i = 0; i < count; ++i) {
    const auto tokens = reader.expect("param");
    if (tokens.size() != 3) throw LoadError("param", "malformed header");
    const std::string name(tokens[0]);
    const auto rows = text::parse_int(tokens[1], name + ".rows");
    const auto cols = text::parse_int(tokens[2], name + ".cols");
    if (rows < 0 || cols < 0) throw LoadError(name, "negative shape");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    for (std::int64_t r = 0; r < rows; ++r) {
      auto row = reader.read_row(name, static_cast<std::size_t>(cols));
      values.insert(values.end(), row.begin(), row.end());
    }
    set.add(name, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
            std::move(values));
  }
  return set;
}

}  // namespace ncis
