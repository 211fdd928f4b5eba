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

#ifndef CPWLOSS_GEOMETRY_HPP_
#define CPWLOSS_GEOMETRY_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpwloss/vec2.hpp"

namespace cpwloss::geometry {

enum class RegionTag {
  kMetal,
  kSubstrate,
  kVacuum,
  kLayerMs,
  kLayerSa,
  kLayerMa,
};

std::string region_tag_name(RegionTag tag);
RegionTag region_tag_from_name(const std::string& name);

enum class ConductorTag { kNone, kTrace, kGround };

// Trenched CPW cross-section parameters. All lengths in micrometers.
//
// Coordinate frame: x runs along the surface, y is vertical. The untouched
// substrate surface is y = 0, substrate below, vacuum above. The cross
// section is mirror symmetric about x = 0 (the center-trace axis).
//
// Sidewall angle convention: phi_deg is the interior angle, measured inside
// the trench, between the horizontal trench floor and the sidewall.
//
//        metal                       metal
//   ----------+                 +----------   y = 0
//             \\               /
//              \\   trench    /    <- phi > 90: floor narrower than mouth
//               +------------+        (sidewalls flare outward toward the top)
//                 phi)    (phi     y = -d
//
// phi = 90 gives vertical sidewalls; phi < 90 gives a reentrant profile whose
// floor is wider than the mouth (the trench tucks under the metal edges).
struct CpwGeometry {
  double w = 0.0;        // center-trace width
  double g = 0.0;        // gap to ground
  double d = 0.0;        // trench depth, >= 0
  double phi_deg = 90.0; // sidewall angle, degrees
  double t_metal = 0.15; // film thickness
  double eps_substrate = 11.7;
  // Domain truncation; <= 0 means "derive from (w, g, d)".
  double domain_halfwidth = 0.0;
  double domain_height = 0.0; // total height, split evenly across y = 0
  // Lifts the 10x far-field rule for reduced-scale validation runs where
  // thin layers are meshed directly. Production analyses leave this off.
  bool allow_small_domain = false;

  // Fills in default domain bounds and checks every invariant; throws
  // geometry errors naming the offending parameters.
  void validate_and_finalize();

  // Horizontal inset of each trench floor corner relative to the mouth edge.
  // Positive for phi > 90 (narrowing with depth), negative for phi < 90.
  double floor_inset() const;
  double trench_floor_width() const { return g - 2.0 * floor_inset(); }

  double half_trace() const { return 0.5 * w; }
  double ground_edge() const { return 0.5 * w + g; }
};

// Thin lossy interface layer used in participation simulations.
struct InterfaceLayerSpec {
  double t_nm = 10.0;   // nominal thickness, nanometers
  double eps_nom = 10.0; // nominal relative permittivity

  double t_um() const { return t_nm * 1e-3; }
};

struct TaggedPolygon {
  std::vector<Vec2> vertices; // simple polygon, counterclockwise
  RegionTag tag = RegionTag::kVacuum;
  ConductorTag conductor = ConductorTag::kNone; // set for METAL polygons
  // For LAYER_* polygons: unit normal of the host interface, used to split
  // layer energy into parallel/perpendicular parts.
  Vec2 layer_normal{0.0, 0.0};

  double area() const;
};

// Conductor surface, used to impose Dirichlet conditions. For finite metal
// thickness this is the closed metal outline; for zero thickness it is the
// bare surface segment.
struct ConductorPath {
  std::vector<Vec2> points;
  ConductorTag tag = ConductorTag::kNone;
  bool closed = false;
};

struct RegionMap {
  std::vector<TaggedPolygon> polygons;
  std::vector<ConductorPath> conductors;
  // Field-concentration points (metal corners, trench mouth/floor corners)
  // that drive graded mesh refinement.
  std::vector<Vec2> refinement_corners;
  // Near-field box around the CPW core; the mesh keeps a baseline resolution
  // inside it (policy h_feature).
  bool has_feature_box = false;
  double feat_x0 = 0.0, feat_y0 = 0.0, feat_x1 = 0.0, feat_y1 = 0.0;
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  double eps_substrate = 11.7;
  std::optional<InterfaceLayerSpec> layers;

  double domain_area() const { return (x_max - x_min) * (y_max - y_min); }
  double total_polygon_area() const;
  // Index of the polygon containing p, or -1. Boundary points resolve to the
  // first matching polygon in list order.
  int locate(const Vec2& p) const;
};

RegionMap build_cross_section(const CpwGeometry& geom,
                              const std::optional<InterfaceLayerSpec>& layers = {});

// Piecewise-linear interpolation of sidewall angle vs depth, clamped to the
// calibrated range outside it.
double interpolate_sidewall_angle(
    double depth, const std::vector<std::pair<double, double>>& calibration);

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);
double polygon_area(const std::vector<Vec2>& poly);

}  // namespace cpwloss::geometry

#endif  // CPWLOSS_GEOMETRY_HPP_
