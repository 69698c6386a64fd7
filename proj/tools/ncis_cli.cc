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

// Command-line driver for the outlier-synthesis pipeline.
//
//   ncis run-all --config run.cfg --out out/ --seed 3
//   ncis fit-density --out out/
//   ncis sweep-lambda --out sweep/

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ncis/config.h"
#include "ncis/pipeline.h"

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = "ncis_out";
  std::int64_t seed = -1;  // -1 keeps the configured seed
};

void add_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config_path, "config file (key = value lines)");
  sub->add_option("--out", flags.out_dir, "artifact directory")->capture_default_str();
  sub->add_option("--seed", flags.seed, "override the configured seed")
      ->check(CLI::NonNegativeNumber);
}

ncis::RunConfig load(const Flags& flags) {
  ncis::RunConfig config = ncis::load_config_file(flags.config_path);
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  return config;
}

void print_log(const ncis::Pipeline& pipeline) {
  for (const auto& line : pipeline.log()) std::cout << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outlier synthesis and OOD classifier pipeline"};
  app.require_subcommand(1);
  Flags flags;

  struct StageCommand {
    const char* name;
    ncis::Stage stage;
    const char* help;
  };
  const StageCommand stages[] = {
      {"embed", ncis::Stage::kEmbed, "write train, held-out and OOD embeddings"},
      {"train-cvpn", ncis::Stage::kTrainCvpn, "select K and train the cVPN"},
      {"fit-density", ncis::Stage::kFitDensity, "fit per-class Gaussians in invariant space"},
      {"sample-outliers", ncis::Stage::kSampleOutliers, "synthesize boundary outliers"},
      {"train-classifier", ncis::Stage::kTrainClassifier, "train the energy-regularized classifier"},
      {"evaluate", ncis::Stage::kEvaluate, "score held-out and OOD points, write metrics.csv"},
  };
  for (const auto& s : stages) add_flags(app.add_subcommand(s.name, s.help), flags);
  add_flags(app.add_subcommand("run-all", "run every stage in order"), flags);
  add_flags(app.add_subcommand("sweep-lambda", "rerun density onwards for each sweep lambda"),
            flags);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const ncis::RunConfig config = load(flags);
    if (command == "sweep-lambda") {
      const auto rows = ncis::sweep_lambda(config, flags.out_dir);
      std::cout << ncis::sweep_csv(rows);
      return 0;
    }
    ncis::Pipeline pipeline(config, flags.out_dir);
    try {
      if (command == "run-all") {
        pipeline.run_all();
      } else {
        for (const auto& s : stages) {
          if (command == s.name) pipeline.run_stage(s.stage);
        }
      }
    } catch (...) {
      print_log(pipeline);
      throw;
    }
    print_log(pipeline);
  } catch (const ncis::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
