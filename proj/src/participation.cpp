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

#include "cpwloss/participation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "cpwloss/error.hpp"

namespace cpwloss::participation {

using fem::FieldSolution;
using fem::TraceCurve;
using fem::TraceSample;
using geometry::CpwGeometry;
using geometry::InterfaceLayerSpec;
using geometry::RegionTag;

ParticipationVector participation_direct(const FieldSolution& solution,
                                         const InterfaceLayerSpec& layer_spec) {
  const mesh::Mesh& m = *solution.mesh;
  bool has_layers = false;
  for (const auto& t : m.triangles) {
    if (t.region == RegionTag::kLayerMs || t.region == RegionTag::kLayerSa ||
        t.region == RegionTag::kLayerMa) {
      has_layers = true;
      break;
    }
  }
  if (!has_layers) {
    throw config_error(
        "participation_direct: the solution's mesh has no LAYER_* regions");
  }

  ParticipationVector out;
  out.layer_spec = layer_spec;
  out.method = Method::kDirect;

  // Split each layer triangle's energy along the local layer frame.
  double u_ms_perp = 0.0, u_ms_par = 0.0;
  double u_sa_perp = 0.0, u_sa_par = 0.0;
  double u_ma_perp = 0.0, u_ma_par = 0.0;
  for (std::size_t ti = 0; ti < m.triangles.size(); ++ti) {
    const auto& t = m.triangles[ti];
    if (t.region != RegionTag::kLayerMs && t.region != RegionTag::kLayerSa &&
        t.region != RegionTag::kLayerMa) {
      continue;
    }
    const double eps = solution.permittivity.at(t.region);
    const double area = std::fabs(m.tri_area(static_cast<int>(ti)));
    const Vec2 n = normalized(t.layer_normal);
    const Vec2 tau = perp(n);
    const Vec2 e = solution.e_field[ti];
    const double e_perp = dot(e, n);
    const double e_par = dot(e, tau);
    const double u_perp = 0.5 * fem::kEps0 * eps * e_perp * e_perp * area;
    const double u_par = 0.5 * fem::kEps0 * eps * e_par * e_par * area;
    switch (t.region) {
      case RegionTag::kLayerMs: u_ms_perp += u_perp; u_ms_par += u_par; break;
      case RegionTag::kLayerSa: u_sa_perp += u_perp; u_sa_par += u_par; break;
      default: u_ma_perp += u_perp; u_ma_par += u_par; break;
    }
  }

  const double ut = solution.u_total;
  out.p_ms_perp = u_ms_perp / ut;
  out.p_ms_par = u_ms_par / ut;
  out.p_sa_perp = u_sa_perp / ut;
  out.p_sa_par = u_sa_par / ut;
  out.p_ma_perp = u_ma_perp / ut;
  out.p_ma_par = u_ma_par / ut;
  auto soft_energy = [&](RegionTag tag) {
    const auto it = solution.energy_by_region.find(tag);
    return it == solution.energy_by_region.end() ? 0.0 : it->second;
  };
  out.p_si = soft_energy(RegionTag::kSubstrate) / ut;
  out.p_vac = soft_energy(RegionTag::kVacuum) / ut;
  return out;
}

ParticipationVector participation_perturbative(
    const FieldSolution& base_solution, const InterfaceLayerSpec& layer_spec) {
  const mesh::Mesh& m = *base_solution.mesh;
  for (const auto& t : m.triangles) {
    if (t.region == RegionTag::kLayerMs || t.region == RegionTag::kLayerSa ||
        t.region == RegionTag::kLayerMa) {
      throw config_error(
          "participation_perturbative: base mesh already contains layer "
          "regions (double counting)");
    }
  }
  if (layer_spec.t_nm < 0.0) {
    throw config_error("participation_perturbative: negative layer thickness");
  }

  ParticipationVector out;
  out.layer_spec = layer_spec;
  out.method = Method::kPerturbative;
  out.p_si = fem::energy_integral(base_solution, RegionTag::kSubstrate) /
             base_solution.u_total;
  out.p_vac = fem::energy_integral(base_solution, RegionTag::kVacuum) /
              base_solution.u_total;

  const double t_um = layer_spec.t_um();
  if (t_um == 0.0) return out;  // zero-thickness layer: no contributions

  const double eps_l = layer_spec.eps_nom;
  const double eps_sub = base_solution.permittivity.at(RegionTag::kSubstrate);
  const double eps_vac = base_solution.permittivity.at(RegionTag::kVacuum);
  // All permittivities are relative; u_total drops its eps0 for consistency.
  const double u_rel = base_solution.u_total / fem::kEps0;
  const double pref = t_um / (2.0 * u_rel);

  // MS: substrate-side fields on conductor-substrate boundaries. The normal
  // component dominates; the layer sees D-continuity, the tangential part
  // E-continuity.
  {
    const auto samples = fem::surface_field_trace(base_solution,
                                                  TraceCurve::kConductorSubstrate);
    for (const TraceSample& s : samples) {
      out.p_ms_perp += pref * (eps_sub * eps_sub / eps_l) * s.e_perp * s.e_perp * s.length;
      out.p_ms_par += pref * eps_l * s.e_par * s.e_par * s.length;
    }
  }
  // MA: vacuum-side fields on conductor-vacuum boundaries.
  {
    const auto samples = fem::surface_field_trace(base_solution,
                                                  TraceCurve::kConductorVacuum);
    for (const TraceSample& s : samples) {
      out.p_ma_perp += pref * (eps_vac * eps_vac / eps_l) * s.e_perp * s.e_perp * s.length;
      out.p_ma_par += pref * eps_l * s.e_par * s.e_par * s.length;
    }
  }
  // SA: substrate-vacuum interface. Tangential E is continuous (average the
  // two sides); the normal part uses the side-averaged normal D.
  {
    const auto samples =
        fem::surface_field_trace(base_solution, TraceCurve::kSubstrateVacuum);
    std::map<std::pair<int, int>, std::array<const TraceSample*, 2>> pairs;
    for (const TraceSample& s : samples) {
      auto key = std::make_pair(std::min(s.node_a, s.node_b),
                                std::max(s.node_a, s.node_b));
      auto [it, fresh] = pairs.try_emplace(key, std::array<const TraceSample*, 2>{nullptr, nullptr});
      it->second[s.side == RegionTag::kSubstrate ? 0 : 1] = &s;
    }
    for (const auto& [key, pr] : pairs) {
      if (!pr[0] || !pr[1]) continue;
      const double e_par = 0.5 * (pr[0]->e_par + pr[1]->e_par);
      const double d_perp = 0.5 * (eps_sub * pr[0]->e_perp + eps_vac * pr[1]->e_perp);
      const double len = pr[0]->length;
      out.p_sa_par += pref * eps_l * e_par * e_par * len;
      out.p_sa_perp += pref * (d_perp * d_perp / eps_l) * len;
    }
  }

  return out;
}

ParticipationVector rescale_thin_layer(const ParticipationVector& p,
                                       double t_new_nm, double eps_new) {
  if (!(t_new_nm > 0.0) || !(eps_new > 0.0)) {
    throw config_error("rescale_thin_layer: thickness and permittivity must be "
                       "positive");
  }
  const double t_ratio = t_new_nm / p.layer_spec.t_nm;
  const double par_factor = t_ratio * (eps_new / p.layer_spec.eps_nom);
  const double perp_factor = t_ratio * (p.layer_spec.eps_nom / eps_new);
  ParticipationVector out = p;
  out.p_ms_perp *= perp_factor;
  out.p_ma_perp *= perp_factor;
  out.p_sa_perp *= perp_factor;
  out.p_ms_par *= par_factor;
  out.p_ma_par *= par_factor;
  out.p_sa_par *= par_factor;
  out.layer_spec.t_nm = t_new_nm;
  out.layer_spec.eps_nom = eps_new;
  return out;
}

ParticipationVector simulate_participation(const CpwGeometry& geom_in,
                                           const InterfaceLayerSpec& layer_spec,
                                           const mesh::RefinementPolicy& policy) {
  CpwGeometry geom = geom_in;
  geom.validate_and_finalize();
  const geometry::RegionMap regions = geometry::build_cross_section(geom);
  auto m = std::make_shared<mesh::Mesh>(mesh::generate_mesh(regions, policy));
  const std::map<RegionTag, double> eps = {
      {RegionTag::kSubstrate, geom.eps_substrate},
      {RegionTag::kVacuum, 1.0},
  };
  const FieldSolution sol = fem::solve_electrostatic(m, eps);
  ParticipationVector p = participation_perturbative(sol, layer_spec);
  p.geometry = geom;
  return p;
}

DepthSweepResult depth_sweep(const CpwGeometry& geom_template,
                             const std::vector<double>& depths,
                             const InterfaceLayerSpec& layer_spec,
                             const mesh::RefinementPolicy& policy,
                             DepthHook* hook, int threads) {
  if (depths.empty()) throw config_error("depth_sweep: no depths given");
  for (std::size_t i = 1; i < depths.size(); ++i) {
    if (!(depths[i] > depths[i - 1])) {
      throw config_error("depth_sweep: depths must be strictly increasing");
    }
  }

  // One shared domain, sized for the deepest trench, so truncation error is
  // common to all depths.
  CpwGeometry deepest = geom_template;
  deepest.d = depths.back();
  deepest.domain_halfwidth = geom_template.domain_halfwidth;
  deepest.domain_height = geom_template.domain_height;
  deepest.validate_and_finalize();

  std::vector<CpwGeometry> geoms;
  geoms.reserve(depths.size());
  for (const double d : depths) {
    CpwGeometry geom = deepest;
    geom.d = d;
    geom.validate_and_finalize();
    geoms.push_back(geom);
  }

  std::vector<ParticipationVector> computed(depths.size());
  std::vector<char> have(depths.size(), 0);
  if (hook) {
    for (std::size_t i = 0; i < geoms.size(); ++i) {
      if (hook->lookup(geoms[i], &computed[i])) have[i] = 1;
    }
  }

  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    if (!have[i]) missing.push_back(i);
  }
  if (threads <= 1 || missing.size() <= 1) {
    for (const std::size_t i : missing) {
      computed[i] = simulate_participation(geoms[i], layer_spec, policy);
    }
  } else {
    // Each depth is an independent pure computation; results land in their
    // input slot, so the outcome is schedule independent.
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= missing.size()) return;
        try {
          const std::size_t i = missing[k];
          computed[i] = simulate_participation(geoms[i], layer_spec, policy);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(threads, static_cast<int>(missing.size()));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  if (hook) {
    for (const std::size_t i : missing) hook->store(geoms[i], computed[i]);
  }

  DepthSweepResult result;
  result.depths = depths;
  result.participation = std::move(computed);

  result.asymptote = result.participation.back();
  const double target = result.asymptote.p_total_lossy();
  result.saturation_depth = depths.back();
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const double s = result.participation[i].p_total_lossy();
    if (std::fabs(s - target) <= 0.01 * target) {
      result.saturation_depth = depths[i];
      break;
    }
  }
  return result;
}

}  // namespace cpwloss::participation
