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

#include "ncis/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "ncis/errors.h"
#include "ncis/text_io.h"

namespace ncis {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  std::string_view s = v;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) {
    throw ParseError("expected a finite number, got '" + v + "'");
  }
  return out;
}

long long to_integer(const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("expected an integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_count(const std::string& v, long long min) {
  const long long x = to_integer(v);
  if (x < min) throw ParseError("must be >= " + std::to_string(min) + ", got " + v);
  return static_cast<std::size_t>(x);
}

std::uint64_t to_seed(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError("expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

double positive(const std::string& v) {
  const double x = to_double(v);
  if (!(x > 0.0)) throw ParseError("must be > 0, got " + v);
  return x;
}

double non_negative(const std::string& v) {
  const double x = to_double(v);
  if (!(x >= 0.0)) throw ParseError("must be >= 0, got " + v);
  return x;
}

double open_unit(const std::string& v) {
  const double x = to_double(v);
  if (!(x > 0.0 && x < 1.0)) throw ParseError("must lie in (0, 1), got " + v);
  return x;
}

std::string fmt(double x) { return text::format_double(x); }
std::string fmt(std::size_t x) { return std::to_string(x); }

struct KeySpec {
  const char* name;
  const char* alias;  // nullptr when none
  int stage;          // Stage, or -1 when no stage reads it
  void (*set)(RunConfig&, const std::string&);
  std::string (*get)(const RunConfig&);
};

constexpr int kNoStage = -1;
constexpr int kEmbed = static_cast<int>(Stage::kEmbed);
constexpr int kTrainCvpn = static_cast<int>(Stage::kTrainCvpn);
constexpr int kFitDensity = static_cast<int>(Stage::kFitDensity);
constexpr int kSample = static_cast<int>(Stage::kSampleOutliers);
constexpr int kClassifier = static_cast<int>(Stage::kTrainClassifier);
constexpr int kEvaluate = static_cast<int>(Stage::kEvaluate);

#define NCIS_REAL(field, parse)                                   \
  [](RunConfig& c, const std::string& v) { c.field = parse(v); }, \
      [](const RunConfig& c) { return fmt(c.field); }

#define NCIS_COUNT(field, min)                                           \
  [](RunConfig& c, const std::string& v) { c.field = to_count(v, min); }, \
      [](const RunConfig& c) { return fmt(c.field); }

#define NCIS_STRING(field)                                     \
  [](RunConfig& c, const std::string& v) { c.field = v; },     \
      [](const RunConfig& c) { return c.field; }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", nullptr, kEmbed,
       [](RunConfig& c, const std::string& v) { c.seed = to_seed(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"data.source", nullptr, kEmbed,
       [](RunConfig& c, const std::string& v) {
         if (v != "toy" && v != "csv") throw ParseError("must be 'toy' or 'csv', got '" + v + "'");
         c.data_source = v;
       },
       [](const RunConfig& c) { return c.data_source; }},
      {"data.train_csv", nullptr, kEmbed, NCIS_STRING(data_train_csv)},
      {"data.held_out_csv", nullptr, kEmbed, NCIS_STRING(data_held_out_csv)},
      {"data.ood_csv", nullptr, kEmbed, NCIS_STRING(data_ood_csv)},
      {"toy.n_per_class", nullptr, kEmbed, NCIS_COUNT(toy_n_per_class, 2)},
      {"toy.held_out_per_class", nullptr, kEmbed,
       NCIS_COUNT(toy_held_out_per_class, 1)},
      {"toy.ood_count", nullptr, kEmbed, NCIS_COUNT(toy_ood_count, 1)},
      {"toy.noise", nullptr, kEmbed, NCIS_REAL(toy_noise, non_negative)},
      {"toy.margin", nullptr, kEmbed, NCIS_REAL(toy_margin, positive)},
      {"invariants.p", "p", kTrainCvpn,
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         if (!(x > 0.0 && x < 100.0)) throw ParseError("must lie in (0, 100), got " + v);
         c.p = x;
       },
       [](const RunConfig& c) { return fmt(c.p); }},
      {"invariants.k", nullptr, kTrainCvpn, NCIS_COUNT(k, 0)},
      {"cvpn.learning_rate", nullptr, kTrainCvpn, NCIS_REAL(cvpn_learning_rate, positive)},
      {"cvpn.iterations", nullptr, kTrainCvpn, NCIS_COUNT(cvpn_iterations, 1)},
      {"cvpn.batch_size", nullptr, kTrainCvpn, NCIS_COUNT(cvpn_batch_size, 1)},
      {"cvpn.num_blocks", nullptr, kTrainCvpn, NCIS_COUNT(cvpn_num_blocks, 1)},
      {"cvpn.hidden_width", nullptr, kTrainCvpn,
       NCIS_COUNT(cvpn_hidden_width, 1)},
      {"density.lambda", "lambda", kFitDensity, NCIS_REAL(lambda, positive)},
      {"outliers.q", "q", kSample, NCIS_REAL(q, open_unit)},
      {"outliers.per_class", nullptr, kSample, NCIS_COUNT(outliers_per_class, 1)},
      {"outliers.max_attempts", nullptr, kSample,
       NCIS_COUNT(outliers_max_attempts, 0)},
      {"classifier.beta", "beta", kClassifier, NCIS_REAL(beta, non_negative)},
      {"classifier.epochs", nullptr, kClassifier, NCIS_COUNT(classifier_epochs, 1)},
      {"classifier.learning_rate", nullptr, kClassifier,
       NCIS_REAL(classifier_learning_rate, positive)},
      {"classifier.batch_size", nullptr, kClassifier,
       NCIS_COUNT(classifier_batch_size, 1)},
      {"classifier.hidden_width", nullptr, kClassifier,
       NCIS_COUNT(classifier_hidden_width, 1)},
      {"classifier.phi_width", nullptr, kClassifier,
       NCIS_COUNT(classifier_phi_width, 1)},
      {"eval.tpr_level", nullptr, kEvaluate,
       [](RunConfig& c, const std::string& v) {
         const double x = to_double(v);
         if (!(x > 0.0 && x <= 1.0)) throw ParseError("must lie in (0, 1], got " + v);
         c.eval_tpr_level = x;
       },
       [](const RunConfig& c) { return fmt(c.eval_tpr_level); }},
      {"sweep.lambdas", nullptr, kNoStage,
       [](RunConfig& c, const std::string& v) {
         std::vector<double> out;
         for (auto item : text::split(v, ',')) out.push_back(positive(trim(item)));
         c.sweep_lambdas = std::move(out);
       },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.sweep_lambdas.size(); ++i) {
           if (i) s += ", ";
           s += fmt(c.sweep_lambdas[i]);
         }
         return s;
       }},
      {"sweep.magnitude_per_class", nullptr, kNoStage,
       NCIS_COUNT(sweep_magnitude_per_class, 1)},
  };
  return specs;
}

#undef NCIS_REAL
#undef NCIS_COUNT
#undef NCIS_STRING

const KeySpec* find_key(const std::string& key) {
  for (const auto& spec : key_specs()) {
    if (key == spec.name || (spec.alias && key == spec.alias)) return &spec;
  }
  return nullptr;
}

std::string env_name(const std::string& key) {
  std::string out = "NCIS_";
  for (char c : key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

void set_config_value(RunConfig& config, const std::string& key,
                      const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ParseError("unknown key '" + key + "'");
  try {
    spec->set(config, value);
  } catch (const ParseError& e) {
    throw ParseError(std::string(spec->name) + ": " + e.what());
  }
}

RunConfig parse_config(const std::string& text) {
  return parse_config(text, process_environment());
}

RunConfig parse_config(const std::string& text, const EnvLookup& env) {
  RunConfig config;
  std::map<std::string, std::size_t> seen;  // canonical key -> line
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");
    const KeySpec* spec = find_key(key);
    if (!spec) throw ParseError(line_no, "unknown key '" + key + "'");
    if (value.empty()) throw ParseError(line_no, std::string(spec->name) + ": missing value");
    if (const auto it = seen.find(spec->name); it != seen.end()) {
      throw ParseError(line_no, std::string(spec->name) + ": already set on line " +
                                    std::to_string(it->second));
    }
    seen[spec->name] = line_no;
    try {
      spec->set(config, value);
    } catch (const ParseError& e) {
      throw ParseError(line_no, std::string(spec->name) + ": " + e.what());
    }
  }

  if (env) {
    for (const auto& spec : key_specs()) {
      // The alias first, so the namespaced variable wins when both are set.
      for (const char* name : {spec.alias, spec.name}) {
        if (!name) continue;
        const std::string var = env_name(name);
        const auto value = env(var);
        if (!value) continue;
        try {
          spec.set(config, trim(*value));
        } catch (const ParseError& e) {
          throw ParseError("environment " + var + ": " + e.what());
        }
        seen.erase(spec.name);
      }
    }
  }

  auto fail = [&](const std::string& key, const std::string& what) -> ParseError {
    const auto it = seen.find(key);
    return it == seen.end() ? ParseError(key + ": " + what)
                            : ParseError(it->second, key + ": " + what);
  };
  if (!(config.toy_noise < config.toy_margin)) {
    throw fail("toy.noise", "must be below toy.margin");
  }
  if (config.data_source == "csv" &&
      (config.data_train_csv.empty() || config.data_held_out_csv.empty())) {
    throw fail("data.source", "'csv' needs data.train_csv and data.held_out_csv");
  }
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& spec : key_specs()) out.emplace_back(spec.name);
  return out;
}

std::string canonical_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& spec : key_specs()) {
    // Empty strings are the default for path keys and cannot be written back.
    const std::string value = spec.get(config);
    if (!value.empty()) out << spec.name << " = " << value << '\n';
  }
  return out.str();
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kEmbed: return "embed";
    case Stage::kTrainCvpn: return "train-cvpn";
    case Stage::kFitDensity: return "fit-density";
    case Stage::kSampleOutliers: return "sample-outliers";
    case Stage::kTrainClassifier: return "train-classifier";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

std::uint64_t stage_config_hash(const RunConfig& config, Stage stage) {
  std::string text;
  for (const auto& spec : key_specs()) {
    if (spec.stage == kNoStage || spec.stage > static_cast<int>(stage)) continue;
    text += spec.name;
    text += " = ";
    text += spec.get(config);
    text += '\n';
  }
  return text::fnv1a(text);
}

}  // namespace ncis
