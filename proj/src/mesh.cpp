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

#include "cpwloss/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "cpwloss/error.hpp"

namespace cpwloss::mesh {

using geometry::ConductorTag;
using geometry::RegionMap;
using geometry::RegionTag;
using geometry::TaggedPolygon;

std::string boundary_tag_name(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::kNone: return "NONE";
    case BoundaryTag::kConductorTrace: return "CONDUCTOR_TRACE";
    case BoundaryTag::kConductorGround: return "CONDUCTOR_GROUND";
    case BoundaryTag::kOuter: return "OUTER";
  }
  return "?";
}

void RefinementPolicy::validate() const {
  if (h_max > 0.0 && h_edge > 0.0 && h_edge > h_max) {
    throw config_error("mesh policy: h_edge must be <= h_max");
  }
  if (!(grading > 1.0 && grading <= 2.0)) {
    throw config_error("mesh policy: grading must lie in (1, 2]");
  }
  if (layer_elements < 2) {
    throw config_error("mesh policy: layer_elements must be >= 2");
  }
  if (!(min_angle_deg > 0.0 && min_angle_deg <= 28.0)) {
    throw config_error("mesh policy: min_angle_deg must lie in (0, 28]");
  }
}

Vec2 Mesh::centroid(int tri) const {
  const auto& t = triangles[tri];
  return (nodes[t.v[0]] + nodes[t.v[1]] + nodes[t.v[2]]) / 3.0;
}

double Mesh::tri_area(int tri) const {
  const auto& t = triangles[tri];
  return 0.5 * cross(nodes[t.v[1]] - nodes[t.v[0]], nodes[t.v[2]] - nodes[t.v[0]]);
}

double Mesh::min_angle_deg(int tri) const {
  const auto& t = triangles[tri];
  double best = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Vec2 u = nodes[t.v[(i + 1) % 3]] - nodes[t.v[i]];
    const Vec2 w = nodes[t.v[(i + 2) % 3]] - nodes[t.v[i]];
    const double ang = std::acos(std::clamp(dot(u, w) / (norm(u) * norm(w)), -1.0, 1.0));
    best = std::min(best, ang * 180.0 / 3.14159265358979323846);
  }
  return best;
}

namespace {

constexpr int kGhostCount = 4;

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double acx = a.x - c.x, acy = a.y - c.y;
  const double bcx = b.x - c.x, bcy = b.y - c.y;
  const double det = acx * bcy - acy * bcx;
  const double mag = std::fabs(acx * bcy) + std::fabs(acy * bcx);
  if (std::fabs(det) > 1e-12 * mag) return det;
  const long double det_l =
      static_cast<long double>(acx) * bcy - static_cast<long double>(acy) * bcx;
  if (std::fabs(static_cast<double>(det_l)) > 1e-18 * mag) {
    return static_cast<double>(det_l);
  }
  return 0.0;
}

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  const double adx = a.x - p.x, ady = a.y - p.y;
  const double bdx = b.x - p.x, bdy = b.y - p.y;
  const double cdx = c.x - p.x, cdy = c.y - p.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  const double det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
                     ad * (bdx * cdy - bdy * cdx);
  const double mag = std::fabs(adx) * (std::fabs(bdy * cd) + std::fabs(bd * cdy)) +
                     std::fabs(ady) * (std::fabs(bdx * cd) + std::fabs(bd * cdx)) +
                     ad * (std::fabs(bdx * cdy) + std::fabs(bdy * cdx));
  if (std::fabs(det) > 1e-11 * mag) return det;
  const long double adl = static_cast<long double>(adx) * adx +
                          static_cast<long double>(ady) * ady;
  const long double bdl = static_cast<long double>(bdx) * bdx +
                          static_cast<long double>(bdy) * bdy;
  const long double cdl = static_cast<long double>(cdx) * cdx +
                          static_cast<long double>(cdy) * cdy;
  const long double det_l =
      adx * (bdy * cdl - bdl * cdy) - ady * (bdx * cdl - bdl * cdx) +
      adl * (static_cast<long double>(bdx) * cdy -
             static_cast<long double>(bdy) * cdx);
  if (std::fabs(static_cast<double>(det_l)) > 1e-16 * mag) {
    return static_cast<double>(det_l);
  }
  return 0.0;  // cocircular: deterministic "not inside"
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c, bool* ok) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
  if (std::fabs(d) < 1e-300) {
    *ok = false;
    return a;
  }
  *ok = true;
  const double a2 = norm2(a), b2 = norm2(b), c2 = norm2(c);
  return {(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
          (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
}

// Shared interpolation form; strip grids and edge subdivisions must produce
// bit-identical coordinates for shared points.
Vec2 blend(const Vec2& a, const Vec2& b, double f) {
  return {a.x * (1.0 - f) + b.x * f, a.y * (1.0 - f) + b.y * f};
}

// --- size field ---------------------------------------------------------------

struct SizeField {
  std::vector<Vec2> corners;
  double h_edge = 1.0;
  double h_max = 1.0;
  double slope = 0.8;
  bool has_box = false;
  double bx0 = 0.0, by0 = 0.0, bx1 = 0.0, by1 = 0.0;
  double h_feature = 0.0;

  // Flat band of two element sizes around each corner, then linear growth;
  // capped at h_feature inside the near-field box.
  double operator()(const Vec2& p) const {
    double h = h_max;
    if (!corners.empty()) {
      double dmin = std::numeric_limits<double>::max();
      for (const Vec2& c : corners) dmin = std::min(dmin, dist(p, c));
      const double graded = h_edge + slope * std::max(0.0, dmin - 2.0 * h_edge);
      h = std::clamp(graded, h_edge, h_max);
    }
    if (has_box && h_feature > 0.0 && p.x >= bx0 && p.x <= bx1 && p.y >= by0 &&
        p.y <= by1) {
      h = std::min(h, std::max(h_feature, h_edge));
    }
    return h;
  }
};

// --- node pooling --------------------------------------------------------------

struct NodePool {
  double quantum = 1e-9;
  std::map<std::pair<long long, long long>, int> lookup;
  std::vector<Vec2> coords;

  std::pair<long long, long long> key(const Vec2& p) const {
    return {llround(p.x / quantum), llround(p.y / quantum)};
  }
  int intern(const Vec2& p) {
    auto k = key(p);
    auto it = lookup.find(k);
    if (it != lookup.end()) return it->second;
    const int id = static_cast<int>(coords.size());
    coords.push_back(p);
    lookup.emplace(k, id);
    return id;
  }
  int find(const Vec2& p) const {
    auto it = lookup.find(key(p));
    return it == lookup.end() ? -1 : it->second;
  }
};

// --- segment registry -----------------------------------------------------------

struct SegEntry {
  std::vector<Vec2> pts;  // subdivision including endpoints
  BoundaryTag tag = BoundaryTag::kNone;
  bool splittable = true;
};

struct SegmentRegistry {
  double quantum = 1e-9;
  std::map<std::array<long long, 4>, int> index;
  std::vector<SegEntry> entries;

  std::array<long long, 4> key(const Vec2& a, const Vec2& b) const {
    std::array<long long, 2> ka{llround(a.x / quantum), llround(a.y / quantum)};
    std::array<long long, 2> kb{llround(b.x / quantum), llround(b.y / quantum)};
    if (kb < ka) std::swap(ka, kb);
    return {ka[0], ka[1], kb[0], kb[1]};
  }
  SegEntry* find(const Vec2& a, const Vec2& b) {
    auto it = index.find(key(a, b));
    return it == index.end() ? nullptr : &entries[it->second];
  }
  SegEntry& put(const Vec2& a, const Vec2& b) {
    auto k = key(a, b);
    auto it = index.find(k);
    if (it != index.end()) return entries[it->second];
    index.emplace(k, static_cast<int>(entries.size()));
    entries.emplace_back();
    return entries.back();
  }
};

std::vector<Vec2> subdivide_graded(const Vec2& a, const Vec2& b,
                                   const SizeField& h, double cap) {
  const double len = dist(a, b);
  std::vector<Vec2> pts{a};
  if (len <= 0.0) {
    pts.push_back(b);
    return pts;
  }
  double s = 0.0;
  for (int guard = 0; guard < 4'000'000; ++guard) {
    const Vec2 p = blend(a, b, s / len);
    double step = std::max(std::min(h(p), cap), 1e-9 * len);
    if (s + 1.45 * step >= len) break;
    s += step;
    pts.push_back(blend(a, b, s / len));
  }
  pts.push_back(b);
  return pts;
}

std::vector<Vec2> subdivide_uniform(const Vec2& a, const Vec2& b, int n) {
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    pts.push_back(blend(a, b, static_cast<double>(i) / n));
  }
  pts.front() = a;
  pts.back() = b;
  return pts;
}

// Secondary-rail subdivision at the arc fractions of the primary rail.
std::vector<Vec2> subdivide_matched(const std::vector<Vec2>& primary,
                                    const Vec2& q0, const Vec2& q1) {
  double total = 0.0;
  std::vector<double> acc(primary.size(), 0.0);
  for (std::size_t i = 1; i < primary.size(); ++i) {
    total += dist(primary[i - 1], primary[i]);
    acc[i] = total;
  }
  std::vector<Vec2> out;
  out.reserve(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) {
    out.push_back(blend(q0, q1, total > 0.0 ? acc[i] / total : 0.0));
  }
  out.front() = q0;
  out.back() = q1;
  return out;
}

// --- polygon locator -------------------------------------------------------------

struct PolyLocator {
  const RegionMap* map = nullptr;
  struct Box {
    double x0, y0, x1, y1;
  };
  std::vector<Box> boxes;

  explicit PolyLocator(const RegionMap& m) : map(&m) {
    boxes.reserve(m.polygons.size());
    for (const auto& poly : m.polygons) {
      Box b{1e300, 1e300, -1e300, -1e300};
      for (const Vec2& p : poly.vertices) {
        b.x0 = std::min(b.x0, p.x);
        b.y0 = std::min(b.y0, p.y);
        b.x1 = std::max(b.x1, p.x);
        b.y1 = std::max(b.y1, p.y);
      }
      boxes.push_back(b);
    }
  }

  int locate(const Vec2& p) const {
    for (std::size_t i = 0; i < map->polygons.size(); ++i) {
      const Box& b = boxes[i];
      if (p.x < b.x0 || p.x > b.x1 || p.y < b.y0 || p.y > b.y1) continue;
      if (geometry::point_in_polygon(p, map->polygons[i].vertices)) {
        return static_cast<int>(i);
      }
    }
    return -1;
  }
};

// --- constrained Delaunay core ------------------------------------------------------

struct SegInfo {
  BoundaryTag tag = BoundaryTag::kNone;
  bool splittable = true;
};

class Delaunay {
 public:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> nbr{-1, -1, -1};
    std::array<bool, 3> con{false, false, false};
    bool alive = true;
    int poly = -3;  // -2 ghost/outside, -3 untagged
  };

  std::vector<Vec2> pts;
  std::vector<Tri> tris;
  std::vector<int> vtri;
  std::map<std::pair<int, int>, SegInfo> segments;
  const PolyLocator* locator = nullptr;
  bool tagging = false;
  double dup_tol = 1e-9;
  std::size_t max_pts = 4'000'000;

  static int next(int i) { return (i + 1) % 3; }
  static int prev(int i) { return (i + 2) % 3; }

  void init_box(double x0, double y0, double x1, double y1) {
    const double mx = 2.0 * std::max(x1 - x0, y1 - y0) + 1.0;
    pts = {{x0 - mx, y0 - mx}, {x1 + mx, y0 - mx}, {x1 + mx, y1 + mx},
           {x0 - mx, y1 + mx}};
    Tri a, b;
    a.v = {0, 1, 2};
    b.v = {0, 2, 3};
    a.nbr = {-1, 1, -1};
    b.nbr = {-1, -1, 0};
    tris = {a, b};
    vtri = {0, 0, 0, 1};
  }

  int edge_in(int t, int a, int b) const {
    const Tri& tr = tris[t];
    for (int i = 0; i < 3; ++i) {
      const int p = tr.v[next(i)], q = tr.v[prev(i)];
      if ((p == a && q == b) || (p == b && q == a)) return i;
    }
    throw numerical_error("mesh: edge_in inconsistency");
  }

  static std::pair<int, int> seg_key(int a, int b) {
    return {std::min(a, b), std::max(a, b)};
  }

  int last_alive() const {
    for (int i = static_cast<int>(tris.size()) - 1; i >= 0; --i) {
      if (tris[i].alive) return i;
    }
    throw numerical_error("mesh: no alive triangles");
  }

  int locate(const Vec2& p, int hint) const {
    int t = (hint >= 0 && hint < static_cast<int>(tris.size()) && tris[hint].alive)
                ? hint
                : last_alive();
    for (std::size_t step = 0; step < tris.size() + 64; ++step) {
      const Tri& tr = tris[t];
      int best_e = -1;
      double best_o = 0.0;
      for (int e = 0; e < 3; ++e) {
        const double o = orient2d(pts[tr.v[next(e)]], pts[tr.v[prev(e)]], p);
        if (o < best_o) {
          best_o = o;
          best_e = e;
        }
      }
      if (best_e < 0) return t;
      const int u = tr.nbr[best_e];
      if (u < 0) return t;
      t = u;
    }
    for (std::size_t i = 0; i < tris.size(); ++i) {
      if (!tris[i].alive) continue;
      const Tri& tr = tris[i];
      bool inside = true;
      for (int e = 0; e < 3 && inside; ++e) {
        if (orient2d(pts[tr.v[next(e)]], pts[tr.v[prev(e)]], p) < 0.0) inside = false;
      }
      if (inside) return static_cast<int>(i);
    }
    throw numerical_error("mesh: point location failed");
  }

  // Walks toward p; {tri, -1} when reached, {tri, edge} when a constrained
  // edge blocks the walk.
  std::pair<int, int> walk_guarded(const Vec2& p, int t0) const {
    int t = t0;
    for (std::size_t step = 0; step < tris.size() + 64; ++step) {
      const Tri& tr = tris[t];
      int best_e = -1;
      double best_o = 0.0;
      for (int e = 0; e < 3; ++e) {
        const double o = orient2d(pts[tr.v[next(e)]], pts[tr.v[prev(e)]], p);
        if (o < best_o) {
          best_o = o;
          best_e = e;
        }
      }
      if (best_e < 0) return {t, -1};
      if (tr.con[best_e]) return {t, best_e};
      const int u = tr.nbr[best_e];
      if (u < 0) return {t, -1};
      t = u;
    }
    return {t, -1};
  }

  struct CavityEdge {
    int tri, edge;
  };

  void collect_cavity(const Vec2& p, int t0, std::vector<int>* cavity,
                      std::vector<CavityEdge>* boundary) {
    cavity->clear();
    boundary->clear();
    if (stamp_.size() < tris.size()) stamp_.resize(tris.size(), 0);
    ++epoch_;
    auto marked = [&](int t) { return stamp_[t] == epoch_; };
    stamp_[t0] = epoch_;
    std::vector<int> stack{t0};
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity->push_back(t);
      const Tri& tr = tris[t];
      for (int e = 0; e < 3; ++e) {
        const int u = tr.nbr[e];
        if (u >= 0 && !tr.con[e] && marked(u)) continue;  // interior edge
        bool grow = false;
        if (u >= 0 && !tr.con[e]) {
          const Tri& tu = tris[u];
          if (incircle(pts[tu.v[0]], pts[tu.v[1]], pts[tu.v[2]], p) > 0.0) {
            grow = true;
          }
        }
        if (grow) {
          stamp_[u] = epoch_;
          stack.push_back(u);
        } else {
          boundary->push_back({t, e});
        }
      }
    }
  }

  static bool boundary_closed(const std::vector<CavityEdge>& boundary,
                              const std::vector<Tri>& tris) {
    std::set<int> starts;
    for (const CavityEdge& ce : boundary) {
      const int a = tris[ce.tri].v[next(ce.edge)];
      if (!starts.insert(a).second) return false;
    }
    return true;
  }

  int insert_point(const Vec2& p, int hint) {
    if (pts.size() >= max_pts) {
      throw numerical_error("mesh refinement exceeded the node budget");
    }
    const int t0 = locate(p, hint);
    for (int i = 0; i < 3; ++i) {
      const int v = tris[t0].v[i];
      if (dist(pts[v], p) <= dup_tol) return v;
    }
    std::vector<int> cavity;
    std::vector<CavityEdge> boundary;
    collect_cavity(p, t0, &cavity, &boundary);
    if (!boundary_closed(boundary, tris)) {
      // Cavity wrapped around a constraint tip; fall back to the smallest
      // valid cavity around p.
      shrink_cavity(p, t0, &cavity, &boundary);
    }
    return fan_fill(p, cavity, boundary);
  }

  void shrink_cavity(const Vec2& p, int t0, std::vector<int>* cavity,
                     std::vector<CavityEdge>* boundary) {
    cavity->clear();
    boundary->clear();
    // Include the neighbor across any edge p sits on, so no fan triangle
    // degenerates.
    int on_edge = -1;
    const Tri& tr = tris[t0];
    for (int e = 0; e < 3; ++e) {
      const Vec2& a = pts[tr.v[next(e)]];
      const Vec2& b = pts[tr.v[prev(e)]];
      const double len = dist(a, b);
      if (len <= 0.0) continue;
      if (std::fabs(cross(b - a, p - a)) / len <= 4.0 * dup_tol) on_edge = e;
    }
    cavity->push_back(t0);
    if (on_edge >= 0 && tr.nbr[on_edge] >= 0 && !tr.con[on_edge]) {
      const int u = tr.nbr[on_edge];
      cavity->push_back(u);
      for (int e = 0; e < 3; ++e) {
        if (e != on_edge) boundary->push_back({t0, e});
      }
      const int eu = edge_in(u, tr.v[next(on_edge)], tr.v[prev(on_edge)]);
      for (int e = 0; e < 3; ++e) {
        if (e != eu) boundary->push_back({u, e});
      }
    } else {
      for (int e = 0; e < 3; ++e) boundary->push_back({t0, e});
    }
  }

  int fan_fill(const Vec2& p, const std::vector<int>& cavity,
               const std::vector<CavityEdge>& boundary) {
    const int vid = static_cast<int>(pts.size());
    pts.push_back(p);
    vtri.push_back(-1);
    for (int t : cavity) tris[t].alive = false;

    std::map<int, int> by_start;
    std::vector<std::pair<int, int>> ends;
    for (const CavityEdge& ce : boundary) {
      const Tri& old_tri = tris[ce.tri];
      const int a = old_tri.v[next(ce.edge)];
      const int b = old_tri.v[prev(ce.edge)];
      Tri nt;
      nt.v = {vid, a, b};
      nt.con = {old_tri.con[ce.edge], false, false};
      nt.nbr = {old_tri.nbr[ce.edge], -1, -1};
      const int id = static_cast<int>(tris.size());
      tris.push_back(nt);
      if (nt.nbr[0] >= 0) {
        tris[nt.nbr[0]].nbr[edge_in(nt.nbr[0], a, b)] = id;
      }
      by_start[a] = id;
      ends.emplace_back(id, b);
      vtri[a] = id;
      vtri[b] = id;
      vtri[vid] = id;
      if (tagging) tag_triangle(id);
    }
    for (const auto& [id, b] : ends) {
      const auto it = by_start.find(b);
      if (it == by_start.end()) {
        throw numerical_error("mesh: cavity boundary not closed");
      }
      tris[id].nbr[1] = it->second;   // edge (b, vid)
      tris[it->second].nbr[2] = id;   // edge (vid, b) seen from the sibling
    }
    return vid;
  }

  void tag_triangle(int t) {
    Tri& tr = tris[t];
    for (int i = 0; i < 3; ++i) {
      if (tr.v[i] < kGhostCount) {
        tr.poly = -2;
        return;
      }
    }
    const Vec2 c = (pts[tr.v[0]] + pts[tr.v[1]] + pts[tr.v[2]]) / 3.0;
    tr.poly = locator ? locator->locate(c) : -1;
    if (tr.poly < 0) tr.poly = -2;
  }

  void tag_all() {
    for (std::size_t i = 0; i < tris.size(); ++i) {
      if (tris[i].alive) tag_triangle(static_cast<int>(i));
    }
  }

  bool edge_exists(int a, int b, int* t_out, int* e_out) {
    int start = vtri[a];
    if (start < 0 || !tris[start].alive || !has_vertex(start, a)) {
      start = -1;
      for (std::size_t i = 0; i < tris.size(); ++i) {
        if (tris[i].alive && has_vertex(static_cast<int>(i), a)) {
          start = static_cast<int>(i);
          break;
        }
      }
      if (start < 0) return false;
      vtri[a] = start;
    }
    for (int dir = 0; dir < 2; ++dir) {
      int t = start;
      for (std::size_t guard = 0; guard < tris.size() + 8; ++guard) {
        const Tri& tr = tris[t];
        int k = -1;
        for (int i = 0; i < 3; ++i) {
          if (tr.v[i] == a) k = i;
        }
        if (k < 0) break;
        if (tr.v[next(k)] == b || tr.v[prev(k)] == b) {
          if (t_out) *t_out = t;
          if (e_out) *e_out = edge_in(t, a, b);
          return true;
        }
        const int u = dir == 0 ? tr.nbr[prev(k)] : tr.nbr[next(k)];
        if (u < 0 || u == start) break;
        t = u;
      }
    }
    return false;
  }

  bool has_vertex(int t, int v) const {
    return tris[t].v[0] == v || tris[t].v[1] == v || tris[t].v[2] == v;
  }

  void set_constrained(int a, int b, bool value) {
    int t = -1, e = -1;
    if (!edge_exists(a, b, &t, &e)) {
      throw numerical_error("mesh: constrained edge lookup failed");
    }
    tris[t].con[e] = value;
    const int u = tris[t].nbr[e];
    if (u >= 0) {
      tris[u].con[edge_in(u, tris[t].v[next(e)], tris[t].v[prev(e)])] = value;
    }
  }

  void flip(int t, int e) {
    Tri& tt = tris[t];
    const int u = tt.nbr[e];
    const int a = tt.v[e];
    const int b = tt.v[next(e)];
    const int c = tt.v[prev(e)];
    const int eu = edge_in(u, b, c);
    Tri& tu = tris[u];
    const int d = tu.v[eu];

    const int n_ca = tt.nbr[next(e)];
    const int n_ab = tt.nbr[prev(e)];
    const int n_dc = tu.nbr[prev(eu)];
    const int n_bd = tu.nbr[next(eu)];
    const bool c_ca = tt.con[next(e)];
    const bool c_ab = tt.con[prev(e)];
    const bool c_dc = tu.con[prev(eu)];
    const bool c_bd = tu.con[next(eu)];

    tt.v = {a, b, d};
    tt.nbr = {n_bd, u, n_ab};
    tt.con = {c_bd, false, c_ab};
    tu.v = {a, d, c};
    tu.nbr = {n_dc, n_ca, t};
    tu.con = {c_dc, c_ca, false};

    if (n_bd >= 0) tris[n_bd].nbr[edge_in(n_bd, b, d)] = t;
    if (n_ca >= 0) tris[n_ca].nbr[edge_in(n_ca, c, a)] = u;
    if (n_ab >= 0) tris[n_ab].nbr[edge_in(n_ab, a, b)] = t;
    if (n_dc >= 0) tris[n_dc].nbr[edge_in(n_dc, d, c)] = u;
    vtri[a] = t;
    vtri[b] = t;
    vtri[d] = t;
    vtri[c] = u;
    if (tagging) {
      tag_triangle(t);
      tag_triangle(u);
    }
  }

  bool crosses(int a, int b, int x, int y) const {
    const double o1 = orient2d(pts[a], pts[b], pts[x]);
    const double o2 = orient2d(pts[a], pts[b], pts[y]);
    const double o3 = orient2d(pts[x], pts[y], pts[a]);
    const double o4 = orient2d(pts[x], pts[y], pts[b]);
    return ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) &&
           ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0));
  }

  std::vector<int> vertex_fan(int v) {
    std::vector<int> fan;
    int start = vtri[v];
    if (start < 0 || !tris[start].alive || !has_vertex(start, v)) {
      start = -1;
      for (std::size_t i = 0; i < tris.size(); ++i) {
        if (tris[i].alive && has_vertex(static_cast<int>(i), v)) {
          start = static_cast<int>(i);
          break;
        }
      }
      if (start < 0) return fan;
      vtri[v] = start;
    }
    std::vector<int> stack{start};
    std::set<int> seen;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      if (cur < 0 || !tris[cur].alive || seen.count(cur)) continue;
      if (!has_vertex(cur, v)) continue;
      seen.insert(cur);
      int k = -1;
      for (int i = 0; i < 3; ++i) {
        if (tris[cur].v[i] == v) k = i;
      }
      stack.push_back(tris[cur].nbr[next(k)]);
      stack.push_back(tris[cur].nbr[prev(k)]);
    }
    fan.assign(seen.begin(), seen.end());
    return fan;
  }

  void recover_segment(int va, int vb) {
    if (edge_exists(va, vb, nullptr, nullptr)) return;

    // Enumerate the edges crossed by segment (va, vb).
    std::deque<std::pair<int, int>> queue;
    {
      int t = -1;
      for (int cand : vertex_fan(va)) {
        int k = -1;
        for (int i = 0; i < 3; ++i) {
          if (tris[cand].v[i] == va) k = i;
        }
        const int x = tris[cand].v[next(k)];
        const int y = tris[cand].v[prev(k)];
        if (crosses(va, vb, x, y)) {
          t = cand;
          queue.emplace_back(x, y);
          break;
        }
      }
      if (t < 0) {
        throw numerical_error("mesh: segment recovery failed to start");
      }
      int cur = tris[t].nbr[edge_in(t, queue.back().first, queue.back().second)];
      int ex = queue.back().first, ey = queue.back().second;
      for (std::size_t guard = 0; guard < tris.size() + 64; ++guard) {
        if (cur < 0) throw numerical_error("mesh: segment recovery left hull");
        if (has_vertex(cur, vb)) break;
        const int ee = edge_in(cur, ex, ey);
        const int z = tris[cur].v[ee];
        int nx, ny;
        if (crosses(va, vb, ex, z)) {
          nx = ex;
          ny = z;
        } else {
          nx = z;
          ny = ey;
        }
        if (!crosses(va, vb, nx, ny)) {
          throw numerical_error("mesh: segment recovery lost the segment");
        }
        queue.emplace_back(nx, ny);
        cur = tris[cur].nbr[edge_in(cur, nx, ny)];
        ex = nx;
        ey = ny;
      }
    }

    std::size_t guard = 0;
    const std::size_t cap = 400 * (queue.size() + 8) * (queue.size() + 8) + 40000;
    while (!queue.empty()) {
      if (++guard > cap) {
        throw numerical_error("mesh: segment recovery did not converge");
      }
      auto [x, y] = queue.front();
      queue.pop_front();
      int t = -1, e = -1;
      if (!edge_exists(x, y, &t, &e)) continue;
      if (!crosses(va, vb, x, y)) continue;
      const int u = tris[t].nbr[e];
      if (u < 0) continue;
      const int a = tris[t].v[e];
      const int d = tris[u].v[edge_in(u, tris[t].v[next(e)], tris[t].v[prev(e)])];
      const bool convex =
          orient2d(pts[a], pts[d], pts[x]) * orient2d(pts[a], pts[d], pts[y]) < 0.0;
      if (!convex) {
        queue.emplace_back(x, y);
        continue;
      }
      flip(t, e);
      if (!((a == va && d == vb) || (a == vb && d == va)) &&
          crosses(va, vb, a, d)) {
        queue.emplace_back(a, d);
      }
    }
    if (!edge_exists(va, vb, nullptr, nullptr)) {
      throw numerical_error("mesh: segment recovery failed");
    }
  }

  int split_constrained(int a, int b, const Vec2& p) {
    const auto key = seg_key(a, b);
    auto it = segments.find(key);
    if (it == segments.end()) {
      throw numerical_error("mesh: split of unregistered segment");
    }
    const SegInfo info = it->second;
    segments.erase(it);
    set_constrained(a, b, false);
    int t = -1;
    edge_exists(a, b, &t, nullptr);
    const int vid = insert_point(p, t);
    set_constrained(a, vid, true);
    set_constrained(vid, b, true);
    segments[seg_key(a, vid)] = info;
    segments[seg_key(vid, b)] = info;
    return vid;
  }

 private:
  mutable std::vector<unsigned> stamp_;
  unsigned epoch_ = 0;
};

struct StripPlan {
  int poly = -1;
  std::vector<Vec2> rail_p;
  std::vector<Vec2> rail_q;
  int rows = 2;
};

bool is_layer_tag(RegionTag tag) {
  return tag == RegionTag::kLayerMs || tag == RegionTag::kLayerSa ||
         tag == RegionTag::kLayerMa;
}

}  // namespace

Mesh generate_mesh(const RegionMap& regions, const RefinementPolicy& policy_in) {
  RefinementPolicy policy = policy_in;
  policy.validate();
  if (regions.polygons.empty()) {
    throw config_error("generate_mesh: empty region map");
  }

  const double width = regions.x_max - regions.x_min;
  const double height = regions.y_max - regions.y_min;
  const double diag = std::hypot(width, height);
  if (policy.h_max <= 0.0) policy.h_max = diag / 12.0;
  if (policy.h_edge <= 0.0) policy.h_edge = policy.h_max / 64.0;
  if (policy.h_edge > policy.h_max) policy.h_edge = policy.h_max;

  SizeField size;
  size.corners = regions.refinement_corners;
  size.h_edge = policy.h_edge;
  size.h_max = policy.h_max;
  size.slope = policy.grading - 1.0;
  size.has_box = regions.has_feature_box;
  size.bx0 = regions.feat_x0;
  size.by0 = regions.feat_y0;
  size.bx1 = regions.feat_x1;
  size.by1 = regions.feat_y1;
  size.h_feature = policy.h_feature;

  const double quantum = std::max(diag * 1e-12, 1e-15);

  SegmentRegistry registry;
  registry.quantum = quantum;

  // Layer strips claim their rails first so every bordering polygon adopts
  // the same subdivision. Across edges always carry layer_elements pieces.
  std::vector<StripPlan> strips;
  const double layer_t = regions.layers ? regions.layers->t_um() : 0.0;
  if (layer_t > 0.0) {
    const double cell = layer_t / policy.layer_elements;
    const double rail_cap = policy.layer_aspect * cell;
    for (std::size_t pi = 0; pi < regions.polygons.size(); ++pi) {
      const TaggedPolygon& poly = regions.polygons[pi];
      if (!is_layer_tag(poly.tag)) continue;
      if (poly.vertices.size() != 4) {
        throw numerical_error("mesh: layer polygon " + std::to_string(pi) + " (" +
                              geometry::region_tag_name(poly.tag) +
                              ") is not a quad");
      }
      const auto& v = poly.vertices;
      const Vec2 tangent = perp(poly.layer_normal);
      const double a01 = std::fabs(dot(normalized(v[1] - v[0]), tangent));
      const double a12 = std::fabs(dot(normalized(v[2] - v[1]), tangent));
      StripPlan plan;
      plan.poly = static_cast<int>(pi);
      plan.rows = policy.layer_elements;
      Vec2 p0, p1, q0, q1;
      if (a01 >= a12) {
        p0 = v[0]; p1 = v[1]; q0 = v[3]; q1 = v[2];
      } else {
        p0 = v[1]; p1 = v[2]; q0 = v[0]; q1 = v[3];
      }
      const bool tiny = dist(p0, p1) <= 2.05 * layer_t;
      if (SegEntry* existing = registry.find(p0, p1)) {
        plan.rail_p = existing->pts;
        existing->splittable = false;
        if (dist(plan.rail_p.front(), p0) > dist(plan.rail_p.back(), p0)) {
          std::reverse(plan.rail_p.begin(), plan.rail_p.end());
        }
      } else {
        plan.rail_p = tiny ? subdivide_uniform(p0, p1, policy.layer_elements)
                           : subdivide_graded(p0, p1, size, rail_cap);
        SegEntry& e = registry.put(p0, p1);
        e.pts = plan.rail_p;
        e.splittable = false;
      }
      plan.rail_q = subdivide_matched(plan.rail_p, q0, q1);
      {
        SegEntry& e = registry.put(q0, q1);
        if (e.pts.empty()) {
          e.pts = plan.rail_q;
        }
        e.splittable = false;
      }
      const std::pair<Vec2, Vec2> sides[2] = {{p0, q0}, {p1, q1}};
      for (const auto& [s0, s1] : sides) {
        SegEntry& e = registry.put(s0, s1);
        if (e.pts.empty()) {
          e.pts = subdivide_uniform(s0, s1, policy.layer_elements);
        }
        e.splittable = false;
      }
      strips.push_back(std::move(plan));
    }
  }

  // Corner set for T-junction splitting.
  std::vector<Vec2> corner_points;
  for (const auto& poly : regions.polygons) {
    for (const Vec2& p : poly.vertices) corner_points.push_back(p);
  }
  for (const auto& path : regions.conductors) {
    for (const Vec2& p : path.points) corner_points.push_back(p);
  }

  auto split_at_corners = [&](const Vec2& a, const Vec2& b) {
    const double len = dist(a, b);
    const Vec2 dir = (b - a) / len;
    std::vector<std::pair<double, Vec2>> hits;
    const double tol = std::max(quantum * 4.0, 1e-12 * len);
    for (const Vec2& p : corner_points) {
      const double s = dot(p - a, dir);
      if (s <= tol || s >= len - tol) continue;
      if (std::fabs(cross(dir, p - a)) <= tol) hits.emplace_back(s, p);
    }
    std::sort(hits.begin(), hits.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    std::vector<Vec2> out{a};
    for (const auto& [s, p] : hits) {
      if (dist(out.back(), p) > tol) out.push_back(p);
    }
    out.push_back(b);
    return out;
  };

  auto register_path = [&](const std::vector<Vec2>& points, bool closed,
                           BoundaryTag tag) {
    const std::size_t n = points.size();
    const std::size_t count = closed ? n : n - 1;
    for (std::size_t i = 0; i < count; ++i) {
      const Vec2& a = points[i];
      const Vec2& b = points[(i + 1) % n];
      if (dist(a, b) <= quantum) continue;
      const std::vector<Vec2> pieces = split_at_corners(a, b);
      for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
        SegEntry& e = registry.put(pieces[k], pieces[k + 1]);
        if (e.pts.empty()) {
          e.pts = subdivide_graded(pieces[k], pieces[k + 1], size, size.h_max);
        }
        if (tag != BoundaryTag::kNone) e.tag = tag;
      }
    }
  };

  for (const auto& poly : regions.polygons) {
    register_path(poly.vertices, true, BoundaryTag::kNone);
  }
  for (const auto& path : regions.conductors) {
    register_path(path.points, path.closed,
                  path.tag == ConductorTag::kTrace
                      ? BoundaryTag::kConductorTrace
                      : BoundaryTag::kConductorGround);
  }

  NodePool pool;
  pool.quantum = quantum;
  struct Constraint {
    int a, b;
    SegInfo info;
  };
  std::vector<Constraint> constraints;
  for (const SegEntry& e : registry.entries) {
    for (std::size_t i = 0; i + 1 < e.pts.size(); ++i) {
      const int a = pool.intern(e.pts[i]);
      const int b = pool.intern(e.pts[i + 1]);
      if (a == b) continue;
      constraints.push_back({a, b, {e.tag, e.splittable}});
    }
  }

  PolyLocator locator(regions);

  Delaunay dt;
  dt.locator = &locator;
  dt.dup_tol = std::max(quantum * 2.0, 1e-13 * diag);
  dt.max_pts = policy.max_nodes;
  dt.init_box(regions.x_min, regions.y_min, regions.x_max, regions.y_max);

  std::vector<int> vid_of(pool.coords.size(), -1);
  {
    std::vector<int> order(pool.coords.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int l, int r) {
      const Vec2& p = pool.coords[l];
      const Vec2& q = pool.coords[r];
      return p.x < q.x || (p.x == q.x && p.y < q.y);
    });
    int hint = 0;
    for (int id : order) {
      const int v = dt.insert_point(pool.coords[id], hint);
      vid_of[id] = v;
      hint = dt.vtri[v];
    }
  }

  for (const Constraint& c : constraints) {
    const int va = vid_of[c.a];
    const int vb = vid_of[c.b];
    if (va == vb) continue;
    dt.recover_segment(va, vb);
    dt.set_constrained(va, vb, true);
    dt.segments[Delaunay::seg_key(va, vb)] = c.info;
  }

  dt.tag_all();
  dt.tagging = true;

  // Ruppert-style refinement: quality + size; layer regions are exempt and
  // layer rails are never split.
  {
    const double ratio_bound =
        0.5 / std::sin(policy.min_angle_deg * 3.14159265358979323846 / 180.0);
    const double min_split = std::max(8.0 * dt.dup_tol, 1e-3 * policy.h_edge);
    auto layer_poly = [&](int poly) {
      return poly >= 0 && is_layer_tag(regions.polygons[poly].tag);
    };
    std::deque<int> queue;
    for (std::size_t i = 0; i < dt.tris.size(); ++i) {
      queue.push_back(static_cast<int>(i));
    }
    std::size_t processed = 0;
    while (!queue.empty()) {
      const int t = queue.front();
      queue.pop_front();
      if (++processed > 120'000'000) {
        throw numerical_error("mesh refinement stalled");
      }
      if (t >= static_cast<int>(dt.tris.size())) continue;
      if (!dt.tris[t].alive || dt.tris[t].poly == -2 || layer_poly(dt.tris[t].poly)) {
        continue;
      }
      const Vec2 pa = dt.pts[dt.tris[t].v[0]];
      const Vec2 pb = dt.pts[dt.tris[t].v[1]];
      const Vec2 pc = dt.pts[dt.tris[t].v[2]];
      const double lab = dist(pa, pb), lbc = dist(pb, pc), lca = dist(pc, pa);
      const double shortest = std::min({lab, lbc, lca});
      const double longest = std::max({lab, lbc, lca});
      bool cc_ok = false;
      const Vec2 cc = circumcenter(pa, pb, pc, &cc_ok);
      if (!cc_ok) continue;
      bool bad = dist(cc, pa) / shortest > ratio_bound;
      if (!bad && longest > size((pa + pb + pc) / 3.0)) bad = true;
      if (!bad) continue;

      const std::size_t before = dt.tris.size();
      bool inserted = false;
      const auto [tc, blocked_edge] = dt.walk_guarded(cc, t);
      if (blocked_edge >= 0) {
        const int a = dt.tris[tc].v[Delaunay::next(blocked_edge)];
        const int b = dt.tris[tc].v[Delaunay::prev(blocked_edge)];
        const auto info_it = dt.segments.find(Delaunay::seg_key(a, b));
        const bool splittable =
            info_it != dt.segments.end() && info_it->second.splittable;
        if (splittable && dist(dt.pts[a], dt.pts[b]) > min_split) {
          dt.split_constrained(a, b, (dt.pts[a] + dt.pts[b]) * 0.5);
          inserted = true;
        }
      } else {
        bool dup = false;
        for (int i = 0; i < 3; ++i) {
          if (dist(dt.pts[dt.tris[tc].v[i]], cc) <= 8.0 * dt.dup_tol) dup = true;
        }
        if (!dup) {
          std::vector<int> cavity;
          std::vector<Delaunay::CavityEdge> boundary;
          dt.collect_cavity(cc, tc, &cavity, &boundary);
          int enc_a = -1, enc_b = -1;
          for (const auto& ce : boundary) {
            const auto& bt = dt.tris[ce.tri];
            if (!bt.con[ce.edge]) continue;
            const int a = bt.v[Delaunay::next(ce.edge)];
            const int b = bt.v[Delaunay::prev(ce.edge)];
            if (dot(dt.pts[a] - cc, dt.pts[b] - cc) < 0.0) {
              enc_a = a;
              enc_b = b;
              break;
            }
          }
          if (enc_a >= 0) {
            const auto info_it = dt.segments.find(Delaunay::seg_key(enc_a, enc_b));
            const bool splittable =
                info_it != dt.segments.end() && info_it->second.splittable;
            if (splittable && dist(dt.pts[enc_a], dt.pts[enc_b]) > min_split) {
              dt.split_constrained(enc_a, enc_b,
                                   (dt.pts[enc_a] + dt.pts[enc_b]) * 0.5);
              inserted = true;
            }
          } else if (Delaunay::boundary_closed(boundary, dt.tris)) {
            dt.fan_fill(cc, cavity, boundary);
            inserted = true;
          }
        }
      }
      if (inserted) {
        for (std::size_t i = before; i < dt.tris.size(); ++i) {
          queue.push_back(static_cast<int>(i));
        }
        if (dt.tris[t].alive) queue.push_back(t);
      }
    }
  }

  // Assemble output: CDT triangles minus ghost and layer fills, plus
  // structured layer strips.
  Mesh out;
  NodePool out_pool;
  out_pool.quantum = quantum;

  for (std::size_t i = 0; i < dt.tris.size(); ++i) {
    const auto& tr = dt.tris[i];
    if (!tr.alive || tr.poly < 0) continue;
    const TaggedPolygon& poly = regions.polygons[tr.poly];
    if (is_layer_tag(poly.tag)) continue;
    Triangle t;
    for (int k = 0; k < 3; ++k) t.v[k] = out_pool.intern(dt.pts[tr.v[k]]);
    t.region = poly.tag;
    t.region_poly = tr.poly;
    t.conductor = poly.conductor;
    t.layer_normal = poly.layer_normal;
    out.triangles.push_back(t);
  }

  for (const StripPlan& plan : strips) {
    const TaggedPolygon& poly = regions.polygons[plan.poly];
    const std::size_t cols = plan.rail_p.size() - 1;
    std::vector<std::vector<int>> grid(plan.rows + 1,
                                       std::vector<int>(cols + 1, -1));
    for (int r = 0; r <= plan.rows; ++r) {
      const double f = static_cast<double>(r) / plan.rows;
      for (std::size_t k = 0; k <= cols; ++k) {
        grid[r][k] = out_pool.intern(blend(plan.rail_p[k], plan.rail_q[k], f));
      }
    }
    for (int r = 0; r < plan.rows; ++r) {
      for (std::size_t k = 0; k < cols; ++k) {
        const std::array<int, 4> q = {grid[r][k], grid[r][k + 1],
                                      grid[r + 1][k + 1], grid[r + 1][k]};
        for (int half = 0; half < 2; ++half) {
          Triangle t;
          t.v = half == 0 ? std::array<int, 3>{q[0], q[1], q[2]}
                          : std::array<int, 3>{q[0], q[2], q[3]};
          t.region = poly.tag;
          t.region_poly = plan.poly;
          t.layer_normal = poly.layer_normal;
          out.triangles.push_back(t);
        }
      }
    }
  }

  out.nodes = out_pool.coords;

  for (auto& t : out.triangles) {
    const double a2 = cross(out.nodes[t.v[1]] - out.nodes[t.v[0]],
                            out.nodes[t.v[2]] - out.nodes[t.v[0]]);
    if (a2 == 0.0) throw numerical_error("mesh: degenerate output triangle");
    if (a2 < 0.0) std::swap(t.v[1], t.v[2]);
  }

  for (const auto& [key, info] : dt.segments) {
    const int a = out_pool.find(dt.pts[key.first]);
    const int b = out_pool.find(dt.pts[key.second]);
    if (a < 0 || b < 0) continue;
    out.constrained_edges[{std::min(a, b), std::max(a, b)}] = info.tag;
  }

  {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : out.triangles) {
      for (int k = 0; k < 3; ++k) {
        const int a = t.v[k], b = t.v[(k + 1) % 3];
        edge_count[{std::min(a, b), std::max(a, b)}]++;
      }
    }
    for (const auto& [key, count] : edge_count) {
      if (count > 2) {
        throw numerical_error("mesh: non-conforming edge shared by " +
                              std::to_string(count) + " triangles");
      }
    }
    for (const auto& [key, tag] : out.constrained_edges) {
      if (tag == BoundaryTag::kConductorTrace ||
          tag == BoundaryTag::kConductorGround) {
        out.boundary_edges.push_back({key.first, key.second, tag});
      }
    }
    std::vector<std::pair<int, int>> outer;
    for (const auto& [key, count] : edge_count) {
      if (count != 1) continue;
      auto it = out.constrained_edges.find(key);
      const BoundaryTag tag =
          it == out.constrained_edges.end() ? BoundaryTag::kNone : it->second;
      if (tag == BoundaryTag::kConductorTrace ||
          tag == BoundaryTag::kConductorGround) {
        continue;
      }
      out.boundary_edges.push_back({key.first, key.second, BoundaryTag::kOuter});
      outer.push_back(key);
    }
    for (const auto& key : outer) out.constrained_edges[key] = BoundaryTag::kOuter;
  }

  return out;
}

Mesh refine_mesh(const Mesh& in, const std::vector<double>& indicator,
                 double fraction) {
  if (indicator.size() != in.triangles.size()) {
    throw config_error("refine_mesh: indicator length != triangle count");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw config_error("refine_mesh: fraction must lie in (0, 1]");
  }

  Mesh out = in;
  const std::size_t n = out.triangles.size();

  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return indicator[l] > indicator[r]; });
  const std::size_t count = std::min(
      n,
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<char> want(n, 0);
  for (std::size_t i = 0; i < count; ++i) want[order[i]] = 1;

  auto edge_key = [](int a, int b) {
    return std::pair<int, int>{std::min(a, b), std::max(a, b)};
  };

  std::map<std::pair<int, int>, std::array<int, 2>> edge_tris;
  auto register_tri = [&](int idx) {
    const auto& t = out.triangles[idx];
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] =
          edge_tris.try_emplace(edge_key(t.v[k], t.v[(k + 1) % 3]),
                                std::array<int, 2>{-1, -1});
      auto& slot = it->second;
      if (slot[0] == idx || slot[1] == idx) continue;
      if (slot[0] == -1) {
        slot[0] = idx;
      } else if (slot[1] == -1) {
        slot[1] = idx;
      } else {
        throw numerical_error("refine_mesh: non-conforming input");
      }
    }
  };
  auto unregister_tri = [&](int idx) {
    const auto& t = out.triangles[idx];
    for (int k = 0; k < 3; ++k) {
      auto it = edge_tris.find(edge_key(t.v[k], t.v[(k + 1) % 3]));
      if (it == edge_tris.end()) continue;
      auto& slot = it->second;
      if (slot[0] == idx) {
        slot[0] = slot[1];
        slot[1] = -1;
      } else if (slot[1] == idx) {
        slot[1] = -1;
      }
      if (slot[0] == -1) edge_tris.erase(it);
    }
  };
  for (std::size_t i = 0; i < n; ++i) register_tri(static_cast<int>(i));

  std::map<std::pair<int, int>, int> midpoint_of;
  auto midpoint = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint_of.find(key);
    if (it != midpoint_of.end()) return it->second;
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back((out.nodes[a] + out.nodes[b]) * 0.5);
    midpoint_of.emplace(key, id);
    auto ce = out.constrained_edges.find(key);
    if (ce != out.constrained_edges.end()) {
      const BoundaryTag tag = ce->second;
      out.constrained_edges.erase(ce);
      out.constrained_edges[edge_key(a, id)] = tag;
      out.constrained_edges[edge_key(id, b)] = tag;
    }
    return id;
  };

  auto longest_edge = [&](int idx) {
    const auto& t = out.triangles[idx];
    int best = 0;
    double best_len = -1.0;
    for (int k = 0; k < 3; ++k) {
      const double len = dist(out.nodes[t.v[k]], out.nodes[t.v[(k + 1) % 3]]);
      if (len > best_len * (1.0 + 1e-12)) {
        best_len = len;
        best = k;
      }
    }
    return best;
  };

  auto ensure_want = [&](std::size_t sz) {
    if (want.size() < sz) want.resize(sz, 0);
  };

  auto bisect = [&](int idx, int k, int m) {
    const Triangle t = out.triangles[idx];
    const int a = t.v[k];
    const int b = t.v[(k + 1) % 3];
    const int c = t.v[(k + 2) % 3];
    unregister_tri(idx);
    Triangle t1 = t, t2 = t;
    t1.v = {a, m, c};
    t2.v = {m, b, c};
    out.triangles[idx] = t1;
    const int id2 = static_cast<int>(out.triangles.size());
    out.triangles.push_back(t2);
    register_tri(idx);
    register_tri(id2);
    ensure_want(out.triangles.size());
    return id2;
  };

  std::vector<int> stack;
  for (std::size_t i = n; i-- > 0;) {
    if (want[i]) stack.push_back(static_cast<int>(i));
  }
  std::reverse(stack.begin(), stack.end());

  std::size_t guard = 0;
  while (!stack.empty()) {
    if (++guard > 200u * n + 20'000'000u) {
      throw numerical_error("refine_mesh: bisection did not terminate");
    }
    const int idx = stack.back();
    if (!want[idx]) {
      stack.pop_back();
      continue;
    }
    const int k = longest_edge(idx);
    const int a = out.triangles[idx].v[k];
    const int b = out.triangles[idx].v[(k + 1) % 3];
    const auto key = edge_key(a, b);
    int nb = -1;
    if (auto it = edge_tris.find(key); it != edge_tris.end()) {
      nb = it->second[0] == idx ? it->second[1] : it->second[0];
    }
    if (nb >= 0) {
      const int knb = longest_edge(nb);
      const auto& tn = out.triangles[nb];
      if (edge_key(tn.v[knb], tn.v[(knb + 1) % 3]) != key) {
        ensure_want(out.triangles.size());
        want[nb] = 1;
        stack.push_back(nb);
        continue;
      }
    }
    const int m = midpoint(a, b);
    const int id2 = bisect(idx, k, m);
    want[idx] = 0;
    want[id2] = 0;
    if (nb >= 0) {
      int knb = -1;
      const auto& tn = out.triangles[nb];
      for (int kk = 0; kk < 3; ++kk) {
        if (edge_key(tn.v[kk], tn.v[(kk + 1) % 3]) == key) knb = kk;
      }
      const int id3 = bisect(nb, knb, m);
      want[nb] = 0;
      want[id3] = 0;
    }
    stack.pop_back();
  }

  out.boundary_edges.clear();
  {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : out.triangles) {
      for (int k = 0; k < 3; ++k) {
        edge_count[edge_key(t.v[k], t.v[(k + 1) % 3])]++;
      }
    }
    for (const auto& [key, cnt] : edge_count) {
      if (cnt > 2) throw numerical_error("refine_mesh: non-conforming result");
    }
    for (const auto& [key, tag] : out.constrained_edges) {
      if (tag != BoundaryTag::kNone) {
        out.boundary_edges.push_back({key.first, key.second, tag});
      }
    }
  }

  return out;
}

void write_mesh_text(const Mesh& mesh, std::ostream& os) {
  os << "# cpwloss mesh v1\n";
  os << "# nodes " << mesh.nodes.size() << "\n";
  char buf[160];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", i, mesh.nodes[i].x,
                  mesh.nodes[i].y);
    os << buf;
  }
  os << "# triangles " << mesh.triangles.size() << "\n";
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    os << i << ' ' << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' '
       << geometry::region_tag_name(t.region) << "\n";
  }
  os << "# boundary_edges " << mesh.boundary_edges.size() << "\n";
  for (const auto& e : mesh.boundary_edges) {
    os << e.a << ' ' << e.b << ' ' << boundary_tag_name(e.tag) << "\n";
  }
}

}  // namespace cpwloss::mesh
