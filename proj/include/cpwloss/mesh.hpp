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

#ifndef CPWLOSS_MESH_HPP_
#define CPWLOSS_MESH_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cpwloss/geometry.hpp"
#include "cpwloss/vec2.hpp"

namespace cpwloss::mesh {

enum class BoundaryTag { kNone, kConductorTrace, kConductorGround, kOuter };

std::string boundary_tag_name(BoundaryTag tag);

struct Triangle {
  std::array<int, 3> v{};  // counterclockwise
  geometry::RegionTag region = geometry::RegionTag::kVacuum;
  int region_poly = -1;  // index into the source RegionMap
  geometry::ConductorTag conductor = geometry::ConductorTag::kNone;
  Vec2 layer_normal{0.0, 0.0};  // meaningful for LAYER_* regions
};

struct BoundaryEdge {
  int a = 0, b = 0;
  BoundaryTag tag = BoundaryTag::kNone;
};

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  // Every region-border / conductor / outer edge, keyed by sorted node pair.
  // Needed to keep refinement conforming and to rebuild boundary_edges.
  std::map<std::pair<int, int>, BoundaryTag> constrained_edges;

  Vec2 centroid(int tri) const;
  double tri_area(int tri) const;
  double min_angle_deg(int tri) const;
};

struct RefinementPolicy {
  double h_max = 0.0;   // global max edge length; <= 0 derives from the domain
  double h_edge = 0.0;  // max edge near conductor/trench corners; <= 0 derived
  // Baseline size inside the region map's near-field feature box; <= 0
  // disables the cap.
  double h_feature = 0.0;
  double grading = 1.8; // size-growth ratio between neighboring bands, <= 2
  int layer_elements = 2;     // elements across a thin layer thickness
  double layer_aspect = 25.0; // max length/height ratio of layer elements
  double min_angle_deg = 20.0;
  std::size_t max_nodes = 4'000'000;

  void validate() const;
};

Mesh generate_mesh(const geometry::RegionMap& regions,
                   const RefinementPolicy& policy);

// Longest-edge bisection of the top `fraction` of triangles ranked by
// `indicator` (ties broken by lowest triangle index). Output is conforming.
Mesh refine_mesh(const Mesh& in, const std::vector<double>& indicator,
                 double fraction);

void write_mesh_text(const Mesh& mesh, std::ostream& os);

}  // namespace cpwloss::mesh

#endif  // CPWLOSS_MESH_HPP_
