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

#include "ncis/text_io.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "ncis/errors.h"

namespace ncis::text {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string join_doubles(std::span<const double> values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += format_double(values[i]);
  }
  return out;
}

double parse_double(std::string_view token, const std::string& field) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    // from_chars does not accept "inf"/"nan" spellings produced by printf.
    if (token == "inf") return INFINITY;
    if (token == "-inf") return -INFINITY;
    throw LoadError(field, "expected a number, got '" + std::string(token) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view token, const std::string& field) {
  std::int64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw LoadError(field,
                    "expected an integer, got '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string RecordReader::next_line(const std::string& field) {
  if (!std::getline(in_, line_)) {
    throw LoadError(field, "unexpected end of file (truncated artifact?)");
  }
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  return line_;
}

std::vector<std::string_view> RecordReader::expect(const std::string& key) {
  next_line(key);
  auto tokens = split_whitespace(line_);
  if (tokens.empty() || tokens.front() != key) {
    throw LoadError(key, "expected field '" + key + "', found '" + line_ + "'");
  }
  tokens.erase(tokens.begin());
  return tokens;
}

std::string RecordReader::expect_string(const std::string& key) {
  auto tokens = expect(key);
  if (tokens.size() != 1) throw LoadError(key, "expected one value");
  return std::string(tokens.front());
}

std::int64_t RecordReader::expect_int(const std::string& key) {
  auto tokens = expect(key);
  if (tokens.size() != 1) throw LoadError(key, "expected one value");
  return parse_int(tokens.front(), key);
}

double RecordReader::expect_double(const std::string& key) {
  auto tokens = expect(key);
  if (tokens.size() != 1) throw LoadError(key, "expected one value");
  return parse_double(tokens.front(), key);
}

std::vector<double> RecordReader::expect_doubles(const std::string& key,
                                                 std::size_t n) {
  auto tokens = expect(key);
  if (tokens.size() != n) {
    throw LoadError(key, "expected " + std::to_string(n) + " values, found " +
                             std::to_string(tokens.size()));
  }
  std::vector<double> out;
  out.reserve(n);
  for (auto t : tokens) out.push_back(parse_double(t, key));
  return out;
}

std::vector<double> RecordReader::read_row(const std::string& field,
                                           std::size_t n) {
  next_line(field);
  auto tokens = split_whitespace(line_);
  if (tokens.size() != n) {
    throw LoadError(field, "expected " + std::to_string(n) +
                               " values in row, found " +
                               std::to_string(tokens.size()));
  }
  std::vector<double> out;
  out.reserve(n);
  for (auto t : tokens) out.push_back(parse_double(t, field));
  return out;
}

void RecordReader::expect_schema(const std::string& format,
                                 std::int64_t version) {
  const std::string got = expect_string("format");
  if (got != format) {
    throw LoadError("format", "expected '" + format + "', found '" + got + "'");
  }
  const std::int64_t v = expect_int("schema_version");
  if (v != version) {
    throw VersionError("schema_version",
                       "unsupported version " + std::to_string(v) +
                           " (expected " + std::to_string(version) + ")");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace ncis::text
