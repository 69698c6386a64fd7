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

#include <map>
#include <optional>
#include <string>

#include <gtest/gtest.h>

#include "ncis/errors.h"

namespace ncis {
namespace {

EnvLookup no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    const auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_config(text, no_env());
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "expected ParseError for: " << text;
  return 0;
}

TEST(ParseConfig, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("", no_env());
  EXPECT_EQ(c.p, 2.0);
  EXPECT_EQ(c.lambda, 1e-5);
  EXPECT_EQ(c.beta, 1.0);
  EXPECT_EQ(c.q, 0.05);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.data_source, "toy");
}

TEST(ParseConfig, OverrideReplacesDefault) {
  EXPECT_EQ(parse_config("p = 10", no_env()).p, 10.0);
  EXPECT_EQ(parse_config("invariants.p = 10", no_env()).p, 10.0);
}

TEST(ParseConfig, NegativeLambdaReportsItsLine) {
  EXPECT_EQ(parse_error_line("lambda = -1"), 1u);
  EXPECT_EQ(parse_error_line("# header\n\nbeta = 0.5\ndensity.lambda = -1\n"), 4u);
}

TEST(ParseConfig, RangeChecks) {
  EXPECT_EQ(parse_error_line("p = 0"), 1u);
  EXPECT_EQ(parse_error_line("p = 100"), 1u);
  EXPECT_EQ(parse_error_line("q = 1"), 1u);
  EXPECT_EQ(parse_error_line("beta = -0.1"), 1u);
  EXPECT_EQ(parse_error_line("toy.n_per_class = 1"), 1u);
  EXPECT_EQ(parse_error_line("eval.tpr_level = 0"), 1u);
  EXPECT_EQ(parse_config("eval.tpr_level = 1", no_env()).eval_tpr_level, 1.0);
  EXPECT_EQ(parse_config("beta = 0", no_env()).beta, 0.0);
}

TEST(ParseConfig, MalformedLines) {
  EXPECT_EQ(parse_error_line("lambda 1e-5"), 1u);
  EXPECT_EQ(parse_error_line("seed = 1\n = 3"), 2u);
  EXPECT_EQ(parse_error_line("lambda ="), 1u);
  EXPECT_EQ(parse_error_line("lambda = abc"), 1u);
  EXPECT_EQ(parse_error_line("cvpn.iterations = 1.5"), 1u);
  EXPECT_EQ(parse_error_line("data.source = images"), 1u);
}

TEST(ParseConfig, UnknownKeyIsRejected) {
  try {
    parse_config("seed = 1\nlamda = 1e-4\n", no_env());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("lamda"), std::string::npos);
  }
}

TEST(ParseConfig, DuplicateKeyThroughAliasIsRejected) {
  EXPECT_EQ(parse_error_line("lambda = 1e-4\ndensity.lambda = 1e-3\n"), 2u);
}

TEST(ParseConfig, CommentsAndWhitespace) {
  const RunConfig c =
      parse_config("# full-line comment\n   beta =  0.25   # trailing\n\n\tseed = 7\n", no_env());
  EXPECT_EQ(c.beta, 0.25);
  EXPECT_EQ(c.seed, 7u);
}

TEST(ParseConfig, SweepLambdaList) {
  const RunConfig c = parse_config("sweep.lambdas = 1e-3, 1e-2", no_env());
  EXPECT_EQ(c.sweep_lambdas, (std::vector<double>{1e-3, 1e-2}));
  EXPECT_EQ(parse_error_line("sweep.lambdas = 1e-3, -1"), 1u);
}

TEST(ParseConfig, CsvSourceNeedsPaths) {
  EXPECT_EQ(parse_error_line("data.source = csv"), 1u);
  const RunConfig c = parse_config(
      "data.source = csv\ndata.train_csv = a.csv\ndata.held_out_csv = b.csv\n", no_env());
  EXPECT_EQ(c.data_train_csv, "a.csv");
}

TEST(ParseConfig, NoiseMustStayBelowMargin) {
  EXPECT_EQ(parse_error_line("toy.noise = 0.4"), 1u);
}

TEST(EnvOverride, NamespacedAndShortNames) {
  EXPECT_EQ(parse_config("", env_of({{"NCIS_DENSITY_LAMBDA", "1e-3"}})).lambda, 1e-3);
  EXPECT_EQ(parse_config("lambda = 1e-4", env_of({{"NCIS_LAMBDA", "1e-3"}})).lambda, 1e-3);
  EXPECT_EQ(parse_config("", env_of({{"NCIS_SEED", "42"}})).seed, 42u);
  const RunConfig both =
      parse_config("", env_of({{"NCIS_LAMBDA", "1e-2"}, {"NCIS_DENSITY_LAMBDA", "1e-3"}}));
  EXPECT_EQ(both.lambda, 1e-3);
}

TEST(EnvOverride, BadValueHasNoLine) {
  try {
    parse_config("", env_of({{"NCIS_CLASSIFIER_BETA", "-2"}}));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 0u);
    EXPECT_NE(std::string(e.what()).find("NCIS_CLASSIFIER_BETA"), std::string::npos);
  }
}

TEST(SetConfigValue, UsesKeyTable) {
  RunConfig c;
  set_config_value(c, "q", "0.1");
  EXPECT_EQ(c.q, 0.1);
  EXPECT_THROW(set_config_value(c, "nope", "1"), ParseError);
  EXPECT_THROW(set_config_value(c, "q", "2"), ParseError);
}

TEST(CanonicalConfig, RoundTrips) {
  RunConfig c = parse_config("seed = 9\nlambda = 3.3e-4\nbeta = 0.5\nsweep.lambdas = 1e-4\n",
                             no_env());
  const std::string text = canonical_config(c);
  EXPECT_EQ(canonical_config(parse_config(text, no_env())), text);
  EXPECT_EQ(parse_config(text, no_env()).lambda, 3.3e-4);
  EXPECT_EQ(config_keys().front(), "seed");
}

TEST(StageConfigHash, CoversOnlyUpstreamKeys) {
  const RunConfig a = parse_config("", no_env());
  const RunConfig b = parse_config("lambda = 1e-3", no_env());
  EXPECT_EQ(stage_config_hash(a, Stage::kEmbed), stage_config_hash(b, Stage::kEmbed));
  EXPECT_EQ(stage_config_hash(a, Stage::kTrainCvpn), stage_config_hash(b, Stage::kTrainCvpn));
  EXPECT_NE(stage_config_hash(a, Stage::kFitDensity), stage_config_hash(b, Stage::kFitDensity));
  EXPECT_NE(stage_config_hash(a, Stage::kEvaluate), stage_config_hash(b, Stage::kEvaluate));

  const RunConfig sweep = parse_config("sweep.magnitude_per_class = 10", no_env());
  EXPECT_EQ(stage_config_hash(a, Stage::kEvaluate), stage_config_hash(sweep, Stage::kEvaluate));
  const RunConfig seeded = parse_config("seed = 1", no_env());
  EXPECT_NE(stage_config_hash(a, Stage::kEmbed), stage_config_hash(seeded, Stage::kEmbed));
}

}  // namespace
}  // namespace ncis
