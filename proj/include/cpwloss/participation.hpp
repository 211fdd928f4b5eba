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

#ifndef CPWLOSS_PARTICIPATION_HPP_
#define CPWLOSS_PARTICIPATION_HPP_

#include <vector>

#include "cpwloss/geometry.hpp"
#include "cpwloss/mesh.hpp"
#include "cpwloss/solver.hpp"

namespace cpwloss::participation {

enum class Method { kDirect, kPerturbative };

// Scaled participation ratios of the four lossy regions, with the
// parallel/perpendicular split of each interface layer.
struct ParticipationVector {
  double p_ms_perp = 0.0, p_ms_par = 0.0;
  double p_sa_par = 0.0, p_sa_perp = 0.0;
  double p_ma_perp = 0.0, p_ma_par = 0.0;
  double p_si = 0.0;
  double p_vac = 0.0;
  geometry::CpwGeometry geometry;
  geometry::InterfaceLayerSpec layer_spec;
  Method method = Method::kPerturbative;

  double p_ms() const { return p_ms_perp + p_ms_par; }
  double p_sa() const { return p_sa_par + p_sa_perp; }
  double p_ma() const { return p_ma_perp + p_ma_par; }
  // Total bulk + interface participation (the quantity whose saturation
  // defines the useful trench depth).
  double p_total_lossy() const { return p_si + p_ms() + p_sa() + p_ma(); }
};

// Participation from a solution whose mesh contains the LAYER_* regions.
ParticipationVector participation_direct(
    const fem::FieldSolution& solution,
    const geometry::InterfaceLayerSpec& layer_spec);

// Thin-layer perturbative participation from a layer-free solution, via
// interface line integrals of the traced surface fields.
ParticipationVector participation_perturbative(
    const fem::FieldSolution& base_solution,
    const geometry::InterfaceLayerSpec& layer_spec);

// Rescales layer components to a new thickness/permittivity using the
// thin-layer scaling laws (parallel: t*eps, perpendicular: t/eps).
ParticipationVector rescale_thin_layer(const ParticipationVector& p,
                                       double t_new_nm, double eps_new);

struct DepthSweepResult {
  std::vector<double> depths;
  std::vector<ParticipationVector> participation;
  ParticipationVector asymptote;
  double saturation_depth = 0.0;
};

// Optional per-depth hook, e.g. to reuse cached results. Returning true and
// filling `out` skips the solve for that depth.
class DepthHook {
 public:
  virtual ~DepthHook() = default;
  virtual bool lookup(const geometry::CpwGeometry&, ParticipationVector* out) = 0;
  virtual void store(const geometry::CpwGeometry&, const ParticipationVector&) = 0;
};

// Depths solve independently; `threads` > 1 runs them concurrently with
// results ordered by input depth regardless of completion order.
DepthSweepResult depth_sweep(const geometry::CpwGeometry& geom_template,
                             const std::vector<double>& depths,
                             const geometry::InterfaceLayerSpec& layer_spec,
                             const mesh::RefinementPolicy& policy,
                             DepthHook* hook = nullptr, int threads = 1);

// Geometry -> mesh -> solve -> perturbative participation, with the policy's
// sizing anchored to the geometry.
ParticipationVector simulate_participation(
    const geometry::CpwGeometry& geom,
    const geometry::InterfaceLayerSpec& layer_spec,
    const mesh::RefinementPolicy& policy);

}  // namespace cpwloss::participation

#endif  // CPWLOSS_PARTICIPATION_HPP_
