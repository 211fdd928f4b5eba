// Copyright 2026 The cpwloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <iostream>

#include "cpwloss/config.hpp"
#include "cpwloss/error.hpp"
#include "cpwloss/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "cpwq: interface participation ratios and TLS loss-factor extraction "
      "for trenched CPW resonator cross-sections"};
  app.require_subcommand(1);

  std::string config_path;
  cpwloss::cli::GlobalOptions opts;
  app.add_option("--config", config_path, "configuration file (key = value)")
      ->required();
  app.add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", opts.seed, "random seed")->capture_default_str();
  app.add_option("--threads", opts.threads, "worker threads")->capture_default_str();
  app.add_flag("--no-cache", opts.no_cache, "disable the participation cache");
  app.add_option("--domain-scale", opts.domain_scale,
                 "multiply the simulation domain size (convergence checks)")
      ->capture_default_str();
  app.add_option("--iterations", opts.iterations,
                 "override the Monte Carlo iteration count");

  auto* solve = app.add_subcommand("solve", "capacitance and per-region energies");
  auto* sweep = app.add_subcommand("sweep", "participation vs trench depth");
  auto* fit = app.add_subcommand("fit", "extract loss factors from measurements");
  auto* predict = app.add_subcommand("predict", "predict Q_TLS for a geometry");
  auto* mesh_dump = app.add_subcommand("mesh-dump", "export the generated mesh");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    const cpwloss::io::Config cfg = cpwloss::io::Config::parse_file(config_path);
    if (solve->parsed()) {
      cpwloss::cli::run_solve(cfg, opts, std::cout);
    } else if (sweep->parsed()) {
      cpwloss::cli::run_sweep(cfg, opts, std::cout);
    } else if (fit->parsed()) {
      cpwloss::cli::run_fit(cfg, opts, std::cout);
    } else if (predict->parsed()) {
      cpwloss::cli::run_predict(cfg, opts, std::cout);
    } else if (mesh_dump->parsed()) {
      cpwloss::cli::run_mesh_dump(cfg, opts, std::cout);
    }
  } catch (const cpwloss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
