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

#include "cpwloss/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <set>

#include "cpwloss/error.hpp"

namespace cpwloss::fem {

using geometry::ConductorTag;
using geometry::RegionTag;
using mesh::BoundaryTag;
using mesh::Mesh;

FieldSolution solve_electrostatic(
    std::shared_ptr<const Mesh> mesh_ptr,
    const std::map<RegionTag, double>& permittivity_of, bool outer_dirichlet) {
  if (!mesh_ptr || mesh_ptr->triangles.empty()) {
    throw config_error("solve_electrostatic: empty mesh");
  }
  const Mesh& m = *mesh_ptr;

  for (const auto& t : m.triangles) {
    if (t.region == RegionTag::kMetal) continue;
    if (permittivity_of.find(t.region) == permittivity_of.end()) {
      throw config_error("solve_electrostatic: permittivity map is missing " +
                         geometry::region_tag_name(t.region));
    }
  }

  const int n = static_cast<int>(m.nodes.size());
  // -1 free, otherwise fixed at the given potential.
  std::vector<double> fixed(n, -1.0);
  bool any_trace = false, any_ground = false;
  for (const auto& be : m.boundary_edges) {
    double v = -1.0;
    if (be.tag == BoundaryTag::kConductorTrace) {
      v = 1.0;
      any_trace = true;
    } else if (be.tag == BoundaryTag::kConductorGround) {
      v = 0.0;
      any_ground = true;
    } else if (be.tag == BoundaryTag::kOuter) {
      if (!outer_dirichlet) continue;
      v = 0.0;
    } else {
      continue;
    }
    // Trace potential wins over ground/outer at shared nodes; that never
    // happens in valid geometries, so just take the max.
    fixed[be.a] = std::max(fixed[be.a], v);
    fixed[be.b] = std::max(fixed[be.b], v);
  }
  if (!any_trace || !any_ground) {
    throw numerical_error(
        "solve_electrostatic: mesh lacks CONDUCTOR_TRACE and CONDUCTOR_GROUND "
        "boundaries; the system is singular");
  }
  // Metal interiors are field-free: pin their nodes to the conductor value.
  for (const auto& t : m.triangles) {
    if (t.region != RegionTag::kMetal) continue;
    const double v = t.conductor == ConductorTag::kTrace ? 1.0 : 0.0;
    for (int k = 0; k < 3; ++k) fixed[t.v[k]] = std::max(fixed[t.v[k]], v);
  }

  std::vector<int> eq_of(n, -1);
  int n_free = 0;
  for (int i = 0; i < n; ++i) {
    if (fixed[i] < 0.0) eq_of[i] = n_free++;
  }

  // P1 stiffness assembly over dielectric triangles.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(m.triangles.size()) * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);

  for (const auto& t : m.triangles) {
    if (t.region == RegionTag::kMetal) continue;
    const double eps = permittivity_of.at(t.region);
    const Vec2& p0 = m.nodes[t.v[0]];
    const Vec2& p1 = m.nodes[t.v[1]];
    const Vec2& p2 = m.nodes[t.v[2]];
    const double area2 = cross(p1 - p0, p2 - p0);
    if (area2 <= 0.0) {
      throw numerical_error("solve_electrostatic: non-positive triangle area");
    }
    const double bcoef[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    const double ccoef[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    const double scale = eps / (2.0 * area2);
    for (int i = 0; i < 3; ++i) {
      const int gi = t.v[i];
      if (eq_of[gi] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = t.v[j];
        const double kij = scale * (bcoef[i] * bcoef[j] + ccoef[i] * ccoef[j]);
        if (eq_of[gj] >= 0) {
          triplets.emplace_back(eq_of[gi], eq_of[gj], kij);
        } else {
          rhs[eq_of[gi]] -= kij * fixed[gj];
        }
      }
    }
  }

  Eigen::VectorXd x;
  double residual = 0.0;
  if (n_free > 0) {
    Eigen::SparseMatrix<double> K(n_free, n_free);
    K.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) {
      throw numerical_error(
          "solve_electrostatic: factorization failed (system not SPD)");
    }
    x = ldlt.solve(rhs);
    const double rhs_norm = rhs.norm();
    residual = rhs_norm > 0.0 ? (K * x - rhs).norm() / rhs_norm : 0.0;
    if (residual > 1e-8) {
      // One step of iterative refinement before giving up.
      const Eigen::VectorXd dx = ldlt.solve(rhs - K * x);
      x += dx;
      residual = rhs_norm > 0.0 ? (K * x - rhs).norm() / rhs_norm : 0.0;
    }
    if (!(residual <= 1e-8)) {
      throw numerical_error("solve_electrostatic: linear solve residual " +
                            std::to_string(residual) + " exceeds tolerance");
    }
  }

  FieldSolution sol;
  sol.mesh = mesh_ptr;
  sol.permittivity = permittivity_of;
  sol.residual = residual;
  sol.potentials.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    sol.potentials[i] = fixed[i] >= 0.0 ? fixed[i] : x[eq_of[i]];
  }

  sol.e_field.assign(m.triangles.size(), Vec2{0.0, 0.0});
  for (std::size_t ti = 0; ti < m.triangles.size(); ++ti) {
    const auto& t = m.triangles[ti];
    if (t.region == RegionTag::kMetal) continue;
    const Vec2& p0 = m.nodes[t.v[0]];
    const Vec2& p1 = m.nodes[t.v[1]];
    const Vec2& p2 = m.nodes[t.v[2]];
    const double area2 = cross(p1 - p0, p2 - p0);
    const double u0 = sol.potentials[t.v[0]];
    const double u1 = sol.potentials[t.v[1]];
    const double u2 = sol.potentials[t.v[2]];
    const double gx = (u0 * (p1.y - p2.y) + u1 * (p2.y - p0.y) + u2 * (p0.y - p1.y));
    const double gy = (u0 * (p2.x - p1.x) + u1 * (p0.x - p2.x) + u2 * (p1.x - p0.x));
    sol.e_field[ti] = Vec2{-gx / area2, -gy / area2};
  }

  // Ordered accumulation keeps results independent of any parallel schedule.
  for (std::size_t ti = 0; ti < m.triangles.size(); ++ti) {
    const auto& t = m.triangles[ti];
    const double eps = t.region == RegionTag::kMetal ? 0.0 : permittivity_of.at(t.region);
    const double area = std::fabs(
        0.5 * cross(m.nodes[t.v[1]] - m.nodes[t.v[0]], m.nodes[t.v[2]] - m.nodes[t.v[0]]));
    const double u = 0.5 * kEps0 * eps * norm2(sol.e_field[ti]) * area;
    sol.energy_by_region[t.region] += u;
  }
  sol.u_total = 0.0;
  for (const auto& [tag, u] : sol.energy_by_region) sol.u_total += u;
  if (!(sol.u_total > 0.0)) {
    throw numerical_error("solve_electrostatic: zero field energy");
  }
  sol.capacitance = 2.0 * sol.u_total;  // C = 2U / V^2 with V = 1

  return sol;
}

double energy_integral(const FieldSolution& solution, RegionTag region) {
  const auto it = solution.energy_by_region.find(region);
  if (it == solution.energy_by_region.end()) {
    throw config_error("energy_integral: region " +
                       geometry::region_tag_name(region) +
                       " is absent from the solution");
  }
  return it->second;
}

namespace {

struct EdgeKey {
  int a, b;
  bool operator<(const EdgeKey& o) const {
    return a < o.a || (a == o.a && b < o.b);
  }
};

EdgeKey make_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

std::vector<TraceSample> surface_field_trace(const FieldSolution& solution,
                                             TraceCurve curve) {
  const Mesh& m = *solution.mesh;

  // Edge -> adjacent triangles.
  std::map<EdgeKey, std::array<int, 2>> adj;
  for (std::size_t ti = 0; ti < m.triangles.size(); ++ti) {
    const auto& t = m.triangles[ti];
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] = adj.try_emplace(make_key(t.v[k], t.v[(k + 1) % 3]),
                                         std::array<int, 2>{-1, -1});
      if (it->second[0] == -1) {
        it->second[0] = static_cast<int>(ti);
      } else {
        it->second[1] = static_cast<int>(ti);
      }
    }
  }

  // Gather the edges of the requested curve with their orientation normal.
  struct CurveEdge {
    int a, b;
    int tri_sub = -1;  // substrate- (or sole dielectric-) side triangle
    int tri_vac = -1;
    Vec2 normal;  // away from conductor, or substrate -> vacuum
  };
  std::vector<CurveEdge> edges;

  auto side_of = [&](int tri, int a, int b) {
    // +1 if the triangle lies on the left of a->b.
    const Vec2 mid = m.centroid(tri);
    return cross(m.nodes[b] - m.nodes[a], mid - m.nodes[a]) > 0.0 ? 1 : -1;
  };

  const bool conductor_curve = curve != TraceCurve::kSubstrateVacuum;
  if (conductor_curve) {
    for (const auto& be : m.boundary_edges) {
      if (be.tag != BoundaryTag::kConductorTrace &&
          be.tag != BoundaryTag::kConductorGround) {
        continue;
      }
      if (curve == TraceCurve::kConductorTrace &&
          be.tag != BoundaryTag::kConductorTrace) {
        continue;
      }
      if (curve == TraceCurve::kConductorGround &&
          be.tag != BoundaryTag::kConductorGround) {
        continue;
      }
      const auto it = adj.find(make_key(be.a, be.b));
      if (it == adj.end()) continue;
      for (int s = 0; s < 2; ++s) {
        const int tri = it->second[s];
        if (tri < 0) continue;
        const RegionTag tag = m.triangles[tri].region;
        if (tag == RegionTag::kMetal) continue;
        if (curve == TraceCurve::kConductorSubstrate && tag != RegionTag::kSubstrate) {
          continue;
        }
        if (curve == TraceCurve::kConductorVacuum && tag != RegionTag::kVacuum) {
          continue;
        }
        CurveEdge ce;
        ce.a = be.a;
        ce.b = be.b;
        ce.tri_sub = tri;
        const Vec2 tangent = normalized(m.nodes[ce.b] - m.nodes[ce.a]);
        Vec2 nrm = perp(tangent);
        if (side_of(tri, ce.a, ce.b) < 0) nrm = nrm * -1.0;  // into dielectric
        ce.normal = nrm;
        edges.push_back(ce);
      }
    }
  } else {
    for (const auto& [key, tris] : adj) {
      if (tris[0] < 0 || tris[1] < 0) continue;
      const RegionTag r0 = m.triangles[tris[0]].region;
      const RegionTag r1 = m.triangles[tris[1]].region;
      const bool sub_vac = (r0 == RegionTag::kSubstrate && r1 == RegionTag::kVacuum) ||
                           (r0 == RegionTag::kVacuum && r1 == RegionTag::kSubstrate);
      if (!sub_vac) continue;
      CurveEdge ce;
      ce.a = key.a;
      ce.b = key.b;
      ce.tri_sub = r0 == RegionTag::kSubstrate ? tris[0] : tris[1];
      ce.tri_vac = r0 == RegionTag::kVacuum ? tris[0] : tris[1];
      const Vec2 tangent = normalized(m.nodes[ce.b] - m.nodes[ce.a]);
      Vec2 nrm = perp(tangent);
      if (side_of(ce.tri_vac, ce.a, ce.b) < 0) nrm = nrm * -1.0;  // into vacuum
      ce.normal = nrm;
      edges.push_back(ce);
    }
  }

  if (edges.empty()) {
    throw config_error("surface_field_trace: requested curve is absent");
  }

  // Chain the edges for arc positions: deterministic walk from the
  // lexicographically smallest free endpoint.
  std::map<int, std::vector<int>> by_node;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    by_node[edges[i].a].push_back(static_cast<int>(i));
    by_node[edges[i].b].push_back(static_cast<int>(i));
  }
  std::vector<char> used(edges.size(), 0);
  std::vector<TraceSample> samples;
  auto node_less = [&](int l, int r) {
    const Vec2& p = m.nodes[l];
    const Vec2& q = m.nodes[r];
    return p.x < q.x || (p.x == q.x && p.y < q.y);
  };

  auto emit = [&](const CurveEdge& ce, double arc_at_mid) {
    const Vec2 tangent = normalized(m.nodes[ce.b] - m.nodes[ce.a]);
    const double len = dist(m.nodes[ce.a], m.nodes[ce.b]);
    const Vec2 mid = (m.nodes[ce.a] + m.nodes[ce.b]) * 0.5;
    auto push = [&](int tri, RegionTag side) {
      TraceSample s;
      s.arc = arc_at_mid;
      s.length = len;
      s.midpoint = mid;
      s.node_a = ce.a;
      s.node_b = ce.b;
      s.side = side;
      const Vec2 e = solution.e_field[tri];
      s.e_par = dot(e, tangent);
      s.e_perp = dot(e, ce.normal);
      samples.push_back(s);
    };
    if (ce.tri_vac >= 0) {
      push(ce.tri_sub, RegionTag::kSubstrate);
      push(ce.tri_vac, RegionTag::kVacuum);
    } else {
      push(ce.tri_sub, m.triangles[ce.tri_sub].region);
    }
  };

  // Order edges into chains.
  std::vector<int> order(edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int l, int r) {
    const int la = node_less(edges[l].a, edges[l].b) ? edges[l].a : edges[l].b;
    const int ra = node_less(edges[r].a, edges[r].b) ? edges[r].a : edges[r].b;
    if (la != ra) return node_less(la, ra);
    return l < r;
  });

  for (int start : order) {
    if (used[start]) continue;
    // Walk backward to the chain head first.
    int head_edge = start;
    int head_node = node_less(edges[start].a, edges[start].b) ? edges[start].a
                                                              : edges[start].b;
    {
      std::set<int> seen{head_edge};
      bool extended = true;
      while (extended) {
        extended = false;
        for (int cand : by_node[head_node]) {
          if (used[cand] || seen.count(cand) || cand == head_edge) continue;
          head_edge = cand;
          head_node = edges[cand].a == head_node ? edges[cand].b : edges[cand].a;
          seen.insert(cand);
          extended = true;
          break;
        }
      }
    }
    double arc = 0.0;
    int cur_node = head_node;
    int guard = 0;
    while (guard++ <= static_cast<int>(edges.size())) {
      int next_edge = -1;
      for (int cand : by_node[cur_node]) {
        if (!used[cand]) {
          next_edge = cand;
          break;
        }
      }
      if (next_edge < 0) break;
      used[next_edge] = 1;
      CurveEdge ce = edges[next_edge];
      if (ce.b == cur_node) std::swap(ce.a, ce.b);  // orient along the walk
      // Keep the stored normal; only arc order flips.
      const double len = dist(m.nodes[ce.a], m.nodes[ce.b]);
      emit(ce, arc + 0.5 * len);
      arc += len;
      cur_node = ce.b;
    }
  }

  return samples;
}

}  // namespace cpwloss::fem
