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

#ifndef CPWLOSS_SOLVER_HPP_
#define CPWLOSS_SOLVER_HPP_

#include <map>
#include <memory>
#include <vector>

#include "cpwloss/mesh.hpp"
#include "cpwloss/vec2.hpp"

namespace cpwloss::fem {

inline constexpr double kEps0 = 8.8541878128e-12;  // F/m

// Electrostatic solution for 1 V on the trace, 0 V on ground and the outer
// boundary. Energies are per unit length (J/m) at that excitation.
struct FieldSolution {
  std::shared_ptr<const mesh::Mesh> mesh;
  std::map<geometry::RegionTag, double> permittivity;
  std::vector<double> potentials;  // per node, volts
  std::vector<Vec2> e_field;       // per triangle, V/um
  std::map<geometry::RegionTag, double> energy_by_region;  // J/m
  double u_total = 0.0;     // J/m
  double capacitance = 0.0; // F/m
  double residual = 0.0;    // relative residual of the linear solve
};

// `outer_dirichlet` grounds the outer boundary (the production truncation);
// switching it off leaves natural (insulating) outer walls, which analytic
// oracle problems such as the parallel plate require.
FieldSolution solve_electrostatic(
    std::shared_ptr<const mesh::Mesh> mesh,
    const std::map<geometry::RegionTag, double>& permittivity_of,
    bool outer_dirichlet = true);

// Energy stored in one region (J/m); throws if the region is absent.
double energy_integral(const FieldSolution& solution, geometry::RegionTag region);

enum class TraceCurve {
  kConductorTrace,
  kConductorGround,
  kConductorSubstrate,  // all conductor edges seen from the substrate side
  kConductorVacuum,     // all conductor edges seen from the vacuum side
  kSubstrateVacuum,     // dielectric-dielectric interface, both sides
};

struct TraceSample {
  double arc = 0.0;      // arc position along the traced chain (edge midpoint)
  double length = 0.0;   // edge length
  Vec2 midpoint;
  double e_par = 0.0;    // tangential field on this side
  double e_perp = 0.0;   // normal field on this side (normal: away from the
                         // conductor, or from substrate into vacuum)
  geometry::RegionTag side = geometry::RegionTag::kVacuum;
  int node_a = -1, node_b = -1;
};

std::vector<TraceSample> surface_field_trace(const FieldSolution& solution,
                                             TraceCurve curve);

}  // namespace cpwloss::fem

#endif  // CPWLOSS_SOLVER_HPP_
