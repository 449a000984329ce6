/*
 * Copyright 2026 The espsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace cli = espsim::cli;

int main(int argc, char** argv) {
  CLI::App app{"espsim: cycle-level simulator of a tiled accelerator SoC"};
  app.require_subcommand(1);

  std::string validate_cfg;
  auto* validate = app.add_subcommand("validate", "check a configuration and print every violation");
  validate->add_option("config", validate_cfg, "configuration file")->required();

  cli::RunManifest manifest;
  std::string config;
  std::string trace = "summary";
  std::uint64_t seed = 0;
  std::vector<std::string> axes;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("config", config, "configuration file")->required();
    sub->add_option("--out", manifest.out_dir, "output directory")->capture_default_str();
    sub->add_option("--trace", trace, "off, summary, timeline or full")->capture_default_str();
    sub->add_option("--seed", seed, "override the configuration seed");
    sub->add_option("--max-cycles", manifest.max_cycles, "stop after this many cycles")->capture_default_str();
  };
  auto* run = app.add_subcommand("run", "simulate until quiescence and write stats.json");
  common(run);
  auto* sweep = app.add_subcommand("sweep", "run the Cartesian product of parameter axes");
  common(sweep);
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--jobs", manifest.jobs, "concurrent simulations")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitIo;
  }

  if (*validate) return cli::cmd_validate(validate_cfg, std::cout, std::cerr);

  const auto level = espsim::trace_level_from_string(trace);
  if (!level) {
    std::cerr << "usage: unknown trace level " << trace << "\n";
    return cli::kExitIo;
  }
  manifest.config = config;
  manifest.trace = *level;
  if (run->count("--seed") != 0 || sweep->count("--seed") != 0) manifest.seed = seed;
  if (*run) return cli::cmd_run(manifest, std::cout, std::cerr);

  try {
    for (const auto& a : axes) manifest.axes.push_back(cli::parse_axis(a));
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return cli::kExitIo;
  }
  return cli::cmd_sweep(manifest, std::cout, std::cerr);
}
