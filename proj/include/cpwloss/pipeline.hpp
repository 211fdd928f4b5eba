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

#ifndef CPWLOSS_PIPELINE_HPP_
#define CPWLOSS_PIPELINE_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cpwloss/config.hpp"
#include "cpwloss/geometry.hpp"
#include "cpwloss/mesh.hpp"

namespace cpwloss::cli {

struct GlobalOptions {
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 1;
  bool no_cache = false;
  double domain_scale = 1.0;
  long long iterations = 0;  // 0: take the config value / default
};

geometry::CpwGeometry geometry_from_config(const io::Config& cfg,
                                           double domain_scale);
mesh::RefinementPolicy policy_from_config(const io::Config& cfg,
                                          const geometry::CpwGeometry& geom);

// Subcommand bodies; they throw cpwloss::Error on failure and write their
// artifacts under opts.out_dir.
void run_solve(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_sweep(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_fit(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_predict(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_mesh_dump(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log);

}  // namespace cpwloss::cli

#endif  // CPWLOSS_PIPELINE_HPP_
