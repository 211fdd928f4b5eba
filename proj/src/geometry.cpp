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

#include "cpwloss/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpwloss/error.hpp"

namespace cpwloss::geometry {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string region_tag_name(RegionTag tag) {
  switch (tag) {
    case RegionTag::kMetal: return "METAL";
    case RegionTag::kSubstrate: return "SUBSTRATE";
    case RegionTag::kVacuum: return "VACUUM";
    case RegionTag::kLayerMs: return "LAYER_MS";
    case RegionTag::kLayerSa: return "LAYER_SA";
    case RegionTag::kLayerMa: return "LAYER_MA";
  }
  return "?";
}

RegionTag region_tag_from_name(const std::string& name) {
  if (name == "METAL") return RegionTag::kMetal;
  if (name == "SUBSTRATE") return RegionTag::kSubstrate;
  if (name == "VACUUM") return RegionTag::kVacuum;
  if (name == "LAYER_MS") return RegionTag::kLayerMs;
  if (name == "LAYER_SA") return RegionTag::kLayerSa;
  if (name == "LAYER_MA") return RegionTag::kLayerMa;
  throw config_error("unknown region tag: " + name);
}

double CpwGeometry::floor_inset() const {
  return d * std::tan((phi_deg - 90.0) * kPi / 180.0);
}

void CpwGeometry::validate_and_finalize() {
  if (!(w > 0.0)) throw geometry_error("w must be > 0, got w=" + fmt(w));
  if (!(g > 0.0)) throw geometry_error("g must be > 0, got g=" + fmt(g));
  if (!(d >= 0.0)) throw geometry_error("d must be >= 0, got d=" + fmt(d));
  if (!(t_metal >= 0.0)) {
    throw geometry_error("t_metal must be >= 0, got t_metal=" + fmt(t_metal));
  }
  if (!(phi_deg >= 60.0 && phi_deg <= 120.0)) {
    throw geometry_error("phi must lie in [60, 120] degrees, got phi=" +
                         fmt(phi_deg));
  }
  if (!(eps_substrate >= 1.0)) {
    throw geometry_error("eps_substrate must be >= 1, got " + fmt(eps_substrate));
  }

  const double cpw_halfwidth = 0.5 * w + g;
  if (domain_halfwidth <= 0.0) domain_halfwidth = 10.0 * cpw_halfwidth;
  if (domain_height <= 0.0) {
    domain_height = std::max(10.0 * (w + 2.0 * g),
                             2.0 * (d + 2.0 * (w + 2.0 * g)));
  }
  if (!allow_small_domain && domain_halfwidth < 10.0 * cpw_halfwidth) {
    throw geometry_error("domain_halfwidth=" + fmt(domain_halfwidth) +
                         " violates the far-field rule >= 10*(w/2+g)=" +
                         fmt(10.0 * cpw_halfwidth));
  }
  if (!allow_small_domain && domain_height < 10.0 * (w + 2.0 * g)) {
    throw geometry_error("domain_height=" + fmt(domain_height) +
                         " violates the far-field rule >= 10*(w+2g)=" +
                         fmt(10.0 * (w + 2.0 * g)));
  }
  if (allow_small_domain &&
      (domain_halfwidth < cpw_halfwidth + g || domain_height < 2.0 * (w + 2.0 * g))) {
    throw geometry_error("domain too small even for a validation run");
  }
  if (d > 0.0 && 0.5 * domain_height - d < w + 2.0 * g) {
    throw geometry_error("domain_height=" + fmt(domain_height) +
                         " leaves insufficient clearance below a trench of depth d=" +
                         fmt(d));
  }

  const double inset = floor_inset();
  if (d > 0.0 && 2.0 * inset >= g) {
    throw geometry_error(
        "degenerate trench: sidewalls from the two edges of a gap cross before "
        "reaching the floor (2*d*tan(phi-90) = " + fmt(2.0 * inset) +
        " >= g = " + fmt(g) + "; d=" + fmt(d) + ", phi=" + fmt(phi_deg) + ")");
  }
  if (d > 0.0 && inset < 0.0 && 2.0 * (-inset) >= w) {
    throw geometry_error(
        "degenerate trench: reentrant sidewalls from the two gaps meet beneath "
        "the center trace (2*d*tan(90-phi) = " + fmt(-2.0 * inset) +
        " >= w = " + fmt(w) + "; d=" + fmt(d) + ", phi=" + fmt(phi_deg) + ")");
  }
  if (d > 0.0 && inset < 0.0 && -inset >= domain_halfwidth - cpw_halfwidth) {
    throw geometry_error("trench undercut reaches the domain boundary; enlarge "
                         "domain_halfwidth");
  }
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a2 = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a2 += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a2;
}

double TaggedPolygon::area() const { return std::fabs(polygon_area(vertices)); }

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  // Crossing-number test; points on the boundary may resolve either way.
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double RegionMap::total_polygon_area() const {
  double a = 0.0;
  for (const auto& poly : polygons) a += poly.area();
  return a;
}

int RegionMap::locate(const Vec2& p) const {
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const auto& poly = polygons[i];
    if (point_in_polygon(p, poly.vertices)) return static_cast<int>(i);
  }
  return -1;
}

namespace {

void ensure_ccw(std::vector<Vec2>& poly) {
  if (polygon_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
}

// Drops repeated consecutive vertices (exact repeats from degenerate params).
std::vector<Vec2> dedup_loop(const std::vector<Vec2>& in) {
  std::vector<Vec2> out;
  for (const Vec2& p : in) {
    if (out.empty() || dist(out.back(), p) > 1e-12) out.push_back(p);
  }
  while (out.size() > 1 && dist(out.front(), out.back()) <= 1e-12) out.pop_back();
  return out;
}

struct ChainFace {
  Vec2 a, b;        // traversed left to right; substrate on the right-hand side
  RegionTag layer;  // kLayerMs under metal, kLayerSa where exposed
};

// Inward (into substrate) unit normal of a chain face.
Vec2 face_normal(const ChainFace& f) {
  const Vec2 dir = normalized(f.b - f.a);
  return {dir.y, -dir.x};
}

// Intersection of the two offset lines at a chain junction; falls back to a
// plain normal offset when the faces are collinear.
Vec2 miter_point(const Vec2& v, const ChainFace& f1, const ChainFace& f2,
                 double t) {
  const Vec2 n1 = face_normal(f1);
  const Vec2 n2 = face_normal(f2);
  const double det = cross(n1, n2);
  if (std::fabs(det) < 1e-12) return v + n1 * t;
  // Solve n1.x = n1.(v + t n1), n2.x = n2.(v + t n2).
  const double c1 = dot(n1, v) + t;
  const double c2 = dot(n2, v) + t;
  return {(c1 * n2.y - c2 * n1.y) / det, (n1.x * c2 - n2.x * c1) / det};
}

}  // namespace

RegionMap build_cross_section(const CpwGeometry& geom_in,
                              const std::optional<InterfaceLayerSpec>& layers) {
  CpwGeometry geom = geom_in;
  geom.validate_and_finalize();

  const double a = geom.half_trace();
  const double b = geom.ground_edge();
  const double X = geom.domain_halfwidth;
  const double Yt = 0.5 * geom.domain_height;
  const double Yb = -0.5 * geom.domain_height;
  const double tm = geom.t_metal;
  const double d = geom.d;
  const double inset = geom.floor_inset();

  double tl = 0.0;
  if (layers) {
    if (!(layers->t_nm > 0.0)) {
      throw config_error("interface layer thickness must be > 0");
    }
    if (!(layers->eps_nom >= 1.0)) {
      throw config_error("interface layer permittivity must be >= 1");
    }
    tl = layers->t_um();
    if (!(tl < geom.g / 50.0)) {
      throw config_error("interface layer too thick: t=" + fmt(tl) +
                         " um must be < g/50 = " + fmt(geom.g / 50.0) + " um");
    }
    if (d > 0.0 && d < 3.0 * tl) {
      throw config_error("trench depth d=" + fmt(d) +
                         " um is comparable to the layer thickness; use d=0 or "
                         "d >= 3*t");
    }
  }

  RegionMap map;
  map.x_min = -X;
  map.x_max = X;
  map.y_min = Yb;
  map.y_max = Yt;
  map.eps_substrate = geom.eps_substrate;
  map.layers = layers;

  // Surface chain, traversed left to right, substrate on the right-hand side.
  // Mirror-symmetric coordinates are written as explicit negations so the
  // reflection is exact in floating point.
  std::vector<ChainFace> chain;
  const double fo = b - inset;  // outer floor corner |x|
  const double fi = a + inset;  // inner floor corner |x|
  chain.push_back({{-X, 0.0}, {-b, 0.0}, RegionTag::kLayerMs});
  if (d > 0.0) {
    chain.push_back({{-b, 0.0}, {-fo, -d}, RegionTag::kLayerSa});
    chain.push_back({{-fo, -d}, {-fi, -d}, RegionTag::kLayerSa});
    chain.push_back({{-fi, -d}, {-a, 0.0}, RegionTag::kLayerSa});
  } else {
    chain.push_back({{-b, 0.0}, {-a, 0.0}, RegionTag::kLayerSa});
  }
  chain.push_back({{-a, 0.0}, {a, 0.0}, RegionTag::kLayerMs});
  if (d > 0.0) {
    chain.push_back({{a, 0.0}, {fi, -d}, RegionTag::kLayerSa});
    chain.push_back({{fi, -d}, {fo, -d}, RegionTag::kLayerSa});
    chain.push_back({{fo, -d}, {b, 0.0}, RegionTag::kLayerSa});
  } else {
    chain.push_back({{a, 0.0}, {b, 0.0}, RegionTag::kLayerSa});
  }
  chain.push_back({{b, 0.0}, {X, 0.0}, RegionTag::kLayerMs});

  // Offset chain: one point below each junction, straight cuts at the domain
  // sides. With no layers (tl = 0) this coincides with the chain itself.
  std::vector<Vec2> offset(chain.size() + 1);
  offset.front() = Vec2{-X, -tl};
  offset.back() = Vec2{X, -tl};
  for (std::size_t i = 1; i < chain.size(); ++i) {
    offset[i] = miter_point(chain[i].a, chain[i - 1], chain[i], tl);
  }

  // Substrate polygon: offset chain on top, domain box below.
  {
    TaggedPolygon sub;
    sub.tag = RegionTag::kSubstrate;
    sub.vertices = offset;
    sub.vertices.push_back({X, Yb});
    sub.vertices.push_back({-X, Yb});
    sub.vertices = dedup_loop(sub.vertices);
    ensure_ccw(sub.vertices);
    map.polygons.push_back(std::move(sub));
  }

  // MS / SA band quads between the chain and its offset.
  if (tl > 0.0) {
    for (std::size_t i = 0; i < chain.size(); ++i) {
      TaggedPolygon quad;
      quad.tag = chain[i].layer;
      quad.layer_normal = face_normal(chain[i]) * -1.0;  // toward the open side
      quad.vertices = dedup_loop({chain[i].a, chain[i].b, offset[i + 1], offset[i]});
      if (quad.vertices.size() < 3) {
        throw geometry_error("degenerate interface-layer band; geometry too "
                             "small for layer thickness");
      }
      ensure_ccw(quad.vertices);
      map.polygons.push_back(std::move(quad));
    }
  }

  // Metal rectangles and their outlines.
  struct MetalRect {
    double x0, x1;
    ConductorTag tag;
    bool at_left_edge, at_right_edge;
  };
  std::vector<MetalRect> metals = {
      {-X, -b, ConductorTag::kGround, true, false},
      {-a, a, ConductorTag::kTrace, false, false},
      {b, X, ConductorTag::kGround, false, true},
  };
  for (const auto& m : metals) {
    if (tm > 0.0) {
      TaggedPolygon poly;
      poly.tag = RegionTag::kMetal;
      poly.conductor = m.tag;
      poly.vertices = {{m.x0, 0.0}, {m.x1, 0.0}, {m.x1, tm}, {m.x0, tm}};
      map.polygons.push_back(std::move(poly));
      ConductorPath path;
      path.tag = m.tag;
      path.closed = true;
      path.points = {{m.x0, 0.0}, {m.x1, 0.0}, {m.x1, tm}, {m.x0, tm}};
      map.conductors.push_back(std::move(path));
    } else {
      ConductorPath path;
      path.tag = m.tag;
      path.closed = false;
      path.points = {{m.x0, 0.0}, {m.x1, 0.0}};
      map.conductors.push_back(std::move(path));
    }
  }

  // MA bands coat exposed metal faces on the vacuum side. Corner patches take
  // the top-face orientation.
  if (tl > 0.0) {
    auto add_quad = [&](double x0, double x1, double y0, double y1, Vec2 n) {
      TaggedPolygon quad;
      quad.tag = RegionTag::kLayerMa;
      quad.layer_normal = n;
      quad.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
      map.polygons.push_back(std::move(quad));
    };
    for (const auto& m : metals) {
      if (tm > 0.0) {
        if (!m.at_left_edge) add_quad(m.x0 - tl, m.x0, 0.0, tm, {-1.0, 0.0});
        if (!m.at_right_edge) add_quad(m.x1, m.x1 + tl, 0.0, tm, {1.0, 0.0});
        add_quad(m.x0, m.x1, tm, tm + tl, {0.0, 1.0});
        if (!m.at_left_edge) add_quad(m.x0 - tl, m.x0, tm, tm + tl, {0.0, 1.0});
        if (!m.at_right_edge) add_quad(m.x1, m.x1 + tl, tm, tm + tl, {0.0, 1.0});
      } else {
        add_quad(m.x0, m.x1, 0.0, tl, {0.0, 1.0});
      }
    }
  }

  // Vacuum: everything above the surface plus the trench voids, walked as one
  // loop around the (possibly layer-dilated) metal outlines. With zero metal
  // thickness the MA bands sit directly on the surface segments.
  {
    const double top = tm + tl;  // outline height seen from vacuum
    const double xo = tm > 0.0 ? b - tl : b;   // ground-side wall |x|
    const double xi = tm > 0.0 ? a + tl : a;   // trace-side wall |x|
    std::vector<Vec2> loop;
    loop.push_back({X, Yt});
    loop.push_back({X, top});
    loop.push_back({xo, top});
    loop.push_back({xo, 0.0});
    loop.push_back({b, 0.0});
    if (d > 0.0) {
      loop.push_back({fo, -d});
      loop.push_back({fi, -d});
    }
    loop.push_back({a, 0.0});
    loop.push_back({xi, 0.0});
    loop.push_back({xi, top});
    loop.push_back({-xi, top});
    loop.push_back({-xi, 0.0});
    loop.push_back({-a, 0.0});
    if (d > 0.0) {
      loop.push_back({-fi, -d});
      loop.push_back({-fo, -d});
    }
    loop.push_back({-b, 0.0});
    loop.push_back({-xo, 0.0});
    loop.push_back({-xo, top});
    loop.push_back({-X, top});
    loop.push_back({-X, Yt});

    TaggedPolygon vac;
    vac.tag = RegionTag::kVacuum;
    vac.vertices = dedup_loop(loop);
    ensure_ccw(vac.vertices);
    map.polygons.push_back(std::move(vac));
  }

  // Field singularities: gap-side metal corners and trench corners.
  {
    auto add_mirrored = [&](double x, double y) {
      map.refinement_corners.push_back({x, y});
      map.refinement_corners.push_back({-x, y});
    };
    add_mirrored(a, 0.0);
    add_mirrored(b, 0.0);
    if (tm > 0.0) {
      add_mirrored(a, tm);
      add_mirrored(b, tm);
    }
    if (d > 0.0) {
      add_mirrored(fi, -d);
      add_mirrored(fo, -d);
    }
  }

  // Near-field box spanning the gaps, trench, and adjacent surfaces.
  map.has_feature_box = true;
  map.feat_x0 = -(b + 1.5 * geom.g);
  map.feat_x1 = b + 1.5 * geom.g;
  map.feat_y0 = -(d + 1.5 * geom.g);
  map.feat_y1 = tm + 1.5 * geom.g;
  map.feat_x0 = std::max(map.feat_x0, map.x_min);
  map.feat_x1 = std::min(map.feat_x1, map.x_max);
  map.feat_y0 = std::max(map.feat_y0, map.y_min);
  map.feat_y1 = std::min(map.feat_y1, map.y_max);

  return map;
}

double interpolate_sidewall_angle(
    double depth, const std::vector<std::pair<double, double>>& calibration) {
  if (calibration.empty()) {
    throw config_error("sidewall-angle calibration table is empty");
  }
  for (std::size_t i = 1; i < calibration.size(); ++i) {
    if (!(calibration[i].first > calibration[i - 1].first)) {
      throw config_error("sidewall-angle calibration depths must be strictly "
                         "increasing");
    }
  }
  if (depth <= calibration.front().first) return calibration.front().second;
  if (depth >= calibration.back().first) return calibration.back().second;
  for (std::size_t i = 1; i < calibration.size(); ++i) {
    if (depth <= calibration[i].first) {
      const auto& [d0, a0] = calibration[i - 1];
      const auto& [d1, a1] = calibration[i];
      const double f = (depth - d0) / (d1 - d0);
      return a0 + f * (a1 - a0);
    }
  }
  return calibration.back().second;
}

}  // namespace cpwloss::geometry
