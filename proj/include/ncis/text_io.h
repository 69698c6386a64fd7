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

#ifndef NCIS_TEXT_IO_H_
#define NCIS_TEXT_IO_H_

// Helpers for the line-oriented artifact records and CSV files.
//
// A record is a sequence of lines "key value..." read in a fixed order.
// Doubles are written with 17 significant digits so that a value survives
// write -> read -> write unchanged.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ncis::text {

std::string format_double(double value);
std::string join_doubles(std::span<const double> values, char sep = ' ');

double parse_double(std::string_view token, const std::string& field);
std::int64_t parse_int(std::string_view token, const std::string& field);
std::vector<std::string_view> split(std::string_view line, char sep);
std::vector<std::string_view> split_whitespace(std::string_view line);

// Reads records sequentially; every failure is a LoadError naming the field.
class RecordReader {
 public:
  explicit RecordReader(std::istream& in) : in_(in) {}

  // Next line, which must start with `key`; returns the remaining tokens.
  std::vector<std::string_view> expect(const std::string& key);
  std::string expect_string(const std::string& key);
  std::int64_t expect_int(const std::string& key);
  double expect_double(const std::string& key);
  std::vector<double> expect_doubles(const std::string& key, std::size_t n);
  // A line holding exactly n doubles and nothing else.
  std::vector<double> read_row(const std::string& field, std::size_t n);
  void expect_schema(const std::string& format, std::int64_t version);

 private:
  std::string next_line(const std::string& field);

  std::istream& in_;
  std::string line_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// 64-bit FNV-1a, used for manifest content hashes.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace ncis::text

#endif  // NCIS_TEXT_IO_H_
