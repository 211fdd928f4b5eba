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

#include "cpwloss/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "cpwloss/cache.hpp"
#include "cpwloss/csvio.hpp"
#include "cpwloss/error.hpp"
#include "cpwloss/lossfit.hpp"
#include "cpwloss/participation.hpp"
#include "cpwloss/qdata.hpp"
#include "cpwloss/solver.hpp"
#include "cpwloss/stats.hpp"
#include "cpwloss/svgplot.hpp"

namespace cpwloss::cli {

using geometry::CpwGeometry;
using geometry::InterfaceLayerSpec;
using geometry::RegionTag;
using participation::ParticipationVector;

namespace {

void ensure_out_dir(const GlobalOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + opts.out_dir);
}

std::string out_path(const GlobalOptions& opts, const std::string& name) {
  return opts.out_dir + "/" + name;
}

InterfaceLayerSpec layers_from_config(const io::Config& cfg) {
  InterfaceLayerSpec spec;
  spec.t_nm = cfg.get_double_or("layer_t_nm", 10.0);
  spec.eps_nom = cfg.get_double_or("layer_eps", 10.0);
  return spec;
}

std::map<RegionTag, double> permittivity_map(const CpwGeometry& geom,
                                             const InterfaceLayerSpec* layers) {
  std::map<RegionTag, double> eps = {
      {RegionTag::kSubstrate, geom.eps_substrate},
      {RegionTag::kVacuum, 1.0},
  };
  if (layers) {
    eps[RegionTag::kLayerMs] = layers->eps_nom;
    eps[RegionTag::kLayerSa] = layers->eps_nom;
    eps[RegionTag::kLayerMa] = layers->eps_nom;
  }
  return eps;
}

// Cache adapter for depth sweeps.
class CacheHook : public participation::DepthHook {
 public:
  CacheHook(const io::ParticipationCache& cache, const InterfaceLayerSpec& layers,
            const mesh::RefinementPolicy& policy)
      : cache_(cache), layers_(layers), policy_(policy) {}

  bool lookup(const CpwGeometry& geom, ParticipationVector* out) override {
    auto hit = cache_.lookup(io::ParticipationCache::key_of(geom, layers_, policy_));
    if (!hit) return false;
    *out = *hit;
    return true;
  }
  void store(const CpwGeometry& geom, const ParticipationVector& p) override {
    cache_.store(io::ParticipationCache::key_of(geom, layers_, policy_), p);
  }

 private:
  const io::ParticipationCache& cache_;
  InterfaceLayerSpec layers_;
  mesh::RefinementPolicy policy_;
};

ParticipationVector cached_simulate(const CpwGeometry& geom,
                                    const InterfaceLayerSpec& layers,
                                    const mesh::RefinementPolicy& policy,
                                    const io::ParticipationCache& cache) {
  CpwGeometry g = geom;
  g.validate_and_finalize();
  const std::string key = io::ParticipationCache::key_of(g, layers, policy);
  if (auto hit = cache.lookup(key)) return *hit;
  const ParticipationVector p = participation::simulate_participation(g, layers, policy);
  cache.store(key, p);
  return p;
}

}  // namespace

CpwGeometry geometry_from_config(const io::Config& cfg, double domain_scale) {
  CpwGeometry geom;
  geom.w = cfg.get_double("w_um");
  geom.g = cfg.get_double("g_um");
  geom.d = cfg.get_double_or("d_um", 0.0);
  geom.phi_deg = cfg.get_double_or("phi_deg", 90.0);
  geom.t_metal = cfg.get_double_or("t_metal_um", 0.15);
  geom.eps_substrate = cfg.get_double_or("eps_substrate", 11.7);
  geom.domain_halfwidth = cfg.get_double_or("domain_halfwidth_um", 0.0);
  geom.domain_height = cfg.get_double_or("domain_height_um", 0.0);
  geom.validate_and_finalize();
  if (domain_scale != 1.0) {
    geom.domain_halfwidth *= domain_scale;
    geom.domain_height *= domain_scale;
    geom.validate_and_finalize();
  }
  return geom;
}

mesh::RefinementPolicy policy_from_config(const io::Config& cfg,
                                          const CpwGeometry& geom) {
  mesh::RefinementPolicy policy;
  const std::string preset = cfg.get_string_or("mesh_preset", "default");
  double edge_div, max_div, feature_div;
  if (preset == "fast") {
    edge_div = 24.0;
    max_div = 8.0;
    feature_div = 6.0;
  } else if (preset == "default") {
    edge_div = 48.0;
    max_div = 12.0;
    feature_div = 8.0;
  } else if (preset == "fine") {
    edge_div = 96.0;
    max_div = 16.0;
    feature_div = 12.0;
  } else {
    throw config_error("key `mesh_preset`: unknown preset '" + preset + "'");
  }
  policy.h_edge = geom.g / edge_div;
  if (geom.t_metal > 0.0) {
    policy.h_edge = std::min(policy.h_edge, geom.t_metal / 2.0);
  }
  policy.h_max = std::max(geom.domain_halfwidth, geom.domain_height) / max_div;
  policy.h_feature = geom.g / feature_div;
  policy.grading = cfg.get_double_or("mesh_grading", 1.9);
  policy.h_edge = cfg.get_double_or("mesh_h_edge_um", policy.h_edge);
  policy.h_max = cfg.get_double_or("mesh_h_max_um", policy.h_max);
  policy.h_feature = cfg.get_double_or("mesh_h_feature_um", policy.h_feature);
  policy.layer_elements = static_cast<int>(cfg.get_int_or("mesh_layer_elements", 2));
  policy.layer_aspect = cfg.get_double_or("mesh_layer_aspect", 25.0);
  policy.max_nodes = static_cast<std::size_t>(
      cfg.get_int_or("mesh_max_nodes", static_cast<long long>(policy.max_nodes)));
  policy.validate();
  return policy;
}

void run_solve(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  ensure_out_dir(opts);
  const CpwGeometry geom = geometry_from_config(cfg, opts.domain_scale);
  const mesh::RefinementPolicy policy = policy_from_config(cfg, geom);

  const bool with_layers = cfg.has("layer_t_nm");
  std::optional<InterfaceLayerSpec> layers;
  if (with_layers) layers = layers_from_config(cfg);

  const geometry::RegionMap regions = geometry::build_cross_section(geom, layers);
  auto m = std::make_shared<mesh::Mesh>(mesh::generate_mesh(regions, policy));
  const auto eps = permittivity_map(geom, layers ? &*layers : nullptr);

  const int rounds = static_cast<int>(cfg.get_int_or("adapt_rounds", 2));
  const double fraction = cfg.get_double_or("adapt_fraction", 0.2);

  std::vector<double> caps;
  fem::FieldSolution sol = fem::solve_electrostatic(m, eps);
  caps.push_back(sol.capacitance);
  log << "round 0: nodes=" << m->nodes.size() << " triangles=" << m->triangles.size()
      << " capacitance_F_per_m=" << io::fmt_g(sol.capacitance) << "\n";
  for (int r = 1; r <= rounds; ++r) {
    std::vector<double> indicator(m->triangles.size(), 0.0);
    for (std::size_t i = 0; i < m->triangles.size(); ++i) {
      const auto& t = m->triangles[i];
      if (t.region == RegionTag::kMetal) continue;
      indicator[i] = 0.5 * eps.at(t.region) * norm2(sol.e_field[i]) *
                     std::fabs(m->tri_area(static_cast<int>(i)));
    }
    m = std::make_shared<mesh::Mesh>(mesh::refine_mesh(*m, indicator, fraction));
    sol = fem::solve_electrostatic(m, eps);
    caps.push_back(sol.capacitance);
    log << "round " << r << ": nodes=" << m->nodes.size()
        << " triangles=" << m->triangles.size()
        << " capacitance_F_per_m=" << io::fmt_g(sol.capacitance) << "\n";
  }

  double extrapolated = caps.back();
  if (caps.size() >= 3) {
    // Aitken delta-squared on the last three values.
    const double c0 = caps[caps.size() - 3];
    const double c1 = caps[caps.size() - 2];
    const double c2 = caps[caps.size() - 1];
    const double denom = c2 - 2.0 * c1 + c0;
    if (std::fabs(denom) > 1e-30) {
      extrapolated = c2 - (c2 - c1) * (c2 - c1) / denom;
    }
  }
  log << "extrapolated capacitance_F_per_m=" << io::fmt_g(extrapolated) << "\n";

  std::ostringstream csv;
  csv << "quantity,value\n";
  for (const auto& [tag, u] : sol.energy_by_region) {
    csv << "energy_J_per_m_" << geometry::region_tag_name(tag) << ','
        << io::fmt_g(u) << "\n";
  }
  csv << "u_total_J_per_m," << io::fmt_g(sol.u_total) << "\n";
  csv << "capacitance_F_per_m," << io::fmt_g(sol.capacitance) << "\n";
  csv << "capacitance_extrapolated_F_per_m," << io::fmt_g(extrapolated) << "\n";
  csv << "solver_residual," << io::fmt_g(sol.residual) << "\n";
  io::write_file(out_path(opts, "solve_energy.csv"), csv.str());

  if (cfg.get_int_or("dump_fields", 0) != 0) {
    std::ostringstream dump;
    mesh::write_mesh_text(*m, dump);
    dump << "# potentials " << sol.potentials.size() << "\n";
    for (std::size_t i = 0; i < sol.potentials.size(); ++i) {
      dump << i << ' ' << io::fmt_full(sol.potentials[i]) << "\n";
    }
    dump << "# e_field " << sol.e_field.size() << "\n";
    for (std::size_t i = 0; i < sol.e_field.size(); ++i) {
      dump << i << ' ' << io::fmt_full(sol.e_field[i].x) << ' '
           << io::fmt_full(sol.e_field[i].y) << "\n";
    }
    io::write_file(out_path(opts, "solve_field.txt"), dump.str());
  }
}

namespace {

std::vector<double> depths_from_config(const io::Config& cfg) {
  if (cfg.has("depths_um")) return cfg.get_array("depths_um");
  const double lo = cfg.get_double("depth_min_um");
  const double hi = cfg.get_double("depth_max_um");
  const int n = static_cast<int>(cfg.get_int_or("depth_count", 12));
  if (!(lo > 0.0) || !(hi > lo) || n < 2) {
    throw config_error("sweep depths: need 0 < depth_min_um < depth_max_um and "
                       "depth_count >= 2");
  }
  std::vector<double> depths(n);
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / (n - 1);
    depths[i] = lo * std::pow(hi / lo, f);
  }
  return depths;
}

std::string participation_csv(const participation::DepthSweepResult& sweep) {
  std::ostringstream csv;
  csv << "depth_um,p_ms_perp,p_ms_par,p_sa_par,p_sa_perp,p_ma_perp,p_ma_par,"
         "p_si,p_vac\n";
  for (std::size_t i = 0; i < sweep.depths.size(); ++i) {
    const ParticipationVector& p = sweep.participation[i];
    csv << io::fmt_g(sweep.depths[i]) << ',' << io::fmt_g(p.p_ms_perp) << ','
        << io::fmt_g(p.p_ms_par) << ',' << io::fmt_g(p.p_sa_par) << ','
        << io::fmt_g(p.p_sa_perp) << ',' << io::fmt_g(p.p_ma_perp) << ','
        << io::fmt_g(p.p_ma_par) << ',' << io::fmt_g(p.p_si) << ','
        << io::fmt_g(p.p_vac) << "\n";
  }
  return csv.str();
}

}  // namespace

// Depth sweeps must size the shared domain for the deepest trench, not for
// the config's d_um; explicit domain keys still win.
CpwGeometry sweep_template(const io::Config& cfg, const GlobalOptions& opts,
                           const std::vector<double>& depths) {
  CpwGeometry geom = geometry_from_config(cfg, 1.0);
  geom.domain_halfwidth = cfg.get_double_or("domain_halfwidth_um", 0.0);
  geom.domain_height = cfg.get_double_or("domain_height_um", 0.0);
  CpwGeometry probe = geom;
  probe.d = depths.back();
  probe.validate_and_finalize();
  geom.domain_halfwidth = probe.domain_halfwidth * opts.domain_scale;
  geom.domain_height = probe.domain_height * opts.domain_scale;
  return geom;
}

void run_sweep(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  ensure_out_dir(opts);
  const std::vector<double> depths = depths_from_config(cfg);
  const CpwGeometry geom = sweep_template(cfg, opts, depths);
  const mesh::RefinementPolicy policy = policy_from_config(cfg, geom);
  const InterfaceLayerSpec layers = layers_from_config(cfg);

  io::ParticipationCache cache(out_path(opts, "cache"), !opts.no_cache);
  CacheHook hook(cache, layers, policy);
  const auto sweep =
      participation::depth_sweep(geom, depths, layers, policy, &hook, opts.threads);

  io::write_file(out_path(opts, "sweep_participation.csv"), participation_csv(sweep));

  io::SvgPlotSpec plot;
  plot.title = "Participation vs trench depth (w=" + io::fmt_g(geom.w) +
               " um, g=" + io::fmt_g(geom.g) + " um)";
  plot.x_label = "trench depth (um)";
  plot.y_label = "interface participation";
  plot.y2_label = "Si participation";
  auto series = [&](const std::string& name, const std::string& color,
                    auto getter, bool right) {
    io::SvgSeries s;
    s.name = name;
    s.color = color;
    s.right_axis = right;
    for (std::size_t i = 0; i < sweep.depths.size(); ++i) {
      s.points.emplace_back(sweep.depths[i], getter(sweep.participation[i]));
    }
    plot.series.push_back(std::move(s));
  };
  series("MS", "#cc3333", [](const ParticipationVector& p) { return p.p_ms(); }, false);
  series("SA", "#3355cc", [](const ParticipationVector& p) { return p.p_sa(); }, false);
  series("MA", "#8833aa", [](const ParticipationVector& p) { return p.p_ma(); }, false);
  series("Si", "#338833", [](const ParticipationVector& p) { return p.p_si; }, true);
  plot.vline = sweep.saturation_depth;
  io::write_file(out_path(opts, "sweep_participation.svg"), io::render_svg(plot));

  log << "saturation_depth_um=" << io::fmt_g(sweep.saturation_depth) << "\n";
  log << "asymptote_total_participation=" << io::fmt_g(sweep.asymptote.p_total_lossy())
      << "\n";
}

namespace {

struct FitInputs {
  std::vector<std::string> geometry_order;
  std::map<std::string, std::vector<qdata::DeviceRecord>> by_geometry;
  std::vector<qdata::QtlsStat> stats;
  std::vector<std::pair<std::string, ParticipationVector>> participations;
};

ParticipationVector row_vector(double ms, double sa, double ma, double si,
                               const InterfaceLayerSpec& layers) {
  ParticipationVector p;
  p.p_ms_perp = ms;
  p.p_sa_par = sa;
  p.p_ma_perp = ma;
  p.p_si = si;
  p.p_vac = std::max(0.0, 1.0 - si);
  p.layer_spec = layers;
  return p;
}

FitInputs gather_fit_inputs(const io::Config& cfg, const GlobalOptions& opts,
                            std::ostream& log) {
  FitInputs in;
  const std::string meas_path = cfg.get_string("measurements_csv");
  std::istringstream meas_stream(io::read_file(meas_path));
  const qdata::ParseReport report = qdata::parse_measurements(meas_stream);
  if (!report.rejects.empty()) {
    std::ostringstream rej;
    rej << "line,reason\n";
    for (const auto& r : report.rejects) {
      rej << r.line << ",\"" << r.reason << "\"\n";
    }
    io::write_file(out_path(opts, "fit_rejected_rows.csv"), rej.str());
    log << "warning: " << report.rejects.size()
        << " malformed measurement rows written to fit_rejected_rows.csv\n";
  }

  for (const auto& r : report.records) {
    if (in.by_geometry.find(r.geometry_id) == in.by_geometry.end()) {
      in.geometry_order.push_back(r.geometry_id);
    }
    in.by_geometry[r.geometry_id].push_back(r);
  }
  if (in.geometry_order.empty()) {
    throw config_error("fit: no valid measurement records in " + meas_path);
  }

  const std::string policy_str = cfg.get_string_or("invalid_record_policy", "exclude");
  qdata::InvalidRecordPolicy rec_policy;
  if (policy_str == "exclude") {
    rec_policy = qdata::InvalidRecordPolicy::kExclude;
  } else if (policy_str == "clamp") {
    rec_policy = qdata::InvalidRecordPolicy::kClamp;
  } else {
    throw config_error("key `invalid_record_policy`: expected exclude|clamp");
  }

  const InterfaceLayerSpec layers = layers_from_config(cfg);

  for (const std::string& gid : in.geometry_order) {
    in.stats.push_back(qdata::aggregate(in.by_geometry[gid], gid, rec_policy));
  }

  if (cfg.has("participations_csv")) {
    // Externally provided matrix (one row per geometry_id).
    std::istringstream ps(io::read_file(cfg.get_string("participations_csv")));
    std::string line;
    if (!std::getline(ps, line)) {
      throw config_error("participations_csv: empty file");
    }
    std::map<std::string, ParticipationVector> rows;
    int line_no = 1;
    while (std::getline(ps, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = io::split_csv_line(line);
      if (f.size() != 5) {
        throw config_error("participations_csv line " + std::to_string(line_no) +
                           ": expected geometry_id,P_MS,P_SA,P_MA,P_Si");
      }
      double v[4];
      for (int c = 0; c < 4; ++c) {
        char* end = nullptr;
        v[c] = std::strtod(f[c + 1].c_str(), &end);
        if (end != f[c + 1].c_str() + f[c + 1].size() || !(v[c] >= 0.0)) {
          throw config_error("participations_csv line " + std::to_string(line_no) +
                             ": bad value '" + f[c + 1] + "'");
        }
      }
      rows[f[0]] = row_vector(v[0], v[1], v[2], v[3], layers);
    }
    for (const std::string& gid : in.geometry_order) {
      const auto it = rows.find(gid);
      if (it == rows.end()) {
        throw config_error("participations_csv: missing geometry '" + gid + "'");
      }
      in.participations.emplace_back(gid, it->second);
    }
  } else {
    // Simulate each distinct geometry; measured rows must agree on the
    // dimensions within a tolerance.
    io::ParticipationCache cache(out_path(opts, "cache"), !opts.no_cache);
    for (const std::string& gid : in.geometry_order) {
      const auto& recs = in.by_geometry[gid];
      const auto& first = recs.front();
      for (const auto& r : recs) {
        const double tol = 1e-9;
        if (std::fabs(r.w - first.w) > tol || std::fabs(r.g - first.g) > tol ||
            std::fabs(r.d - first.d) > tol || std::fabs(r.phi - first.phi) > tol) {
          throw config_error("fit: geometry '" + gid +
                             "' has inconsistent dimensions across records");
        }
      }
      CpwGeometry geom;
      geom.w = first.w;
      geom.g = first.g;
      geom.d = first.d;
      geom.phi_deg = first.phi;
      geom.t_metal = cfg.get_double_or("t_metal_um", 0.15);
      geom.eps_substrate = cfg.get_double_or("eps_substrate", 11.7);
      geom.validate_and_finalize();
      io::Config policy_cfg = cfg;
      const mesh::RefinementPolicy policy = policy_from_config(policy_cfg, geom);
      ParticipationVector p = cached_simulate(geom, layers, policy, cache);
      log << "participation " << gid << ": P_MS=" << io::fmt_g(p.p_ms_perp)
          << " P_SA=" << io::fmt_g(p.p_sa_par) << " P_MA=" << io::fmt_g(p.p_ma_perp)
          << " P_Si=" << io::fmt_g(p.p_si) << "\n";
      in.participations.emplace_back(gid, p);
    }
  }
  return in;
}

lossfit::InterfaceAssumptions assumptions_from_config(const io::Config& cfg) {
  lossfit::InterfaceAssumptions a;
  a.t_ms_nm = cfg.get_double_or("assume_t_ms_nm", 2.0);
  a.eps_ms = cfg.get_double_or("assume_eps_ms", 11.7);
  a.t_sa_nm = cfg.get_double_or("assume_t_sa_nm", 2.0);
  a.eps_sa = cfg.get_double_or("assume_eps_sa", 4.0);
  a.t_ma_nm = cfg.get_double_or("assume_t_ma_nm", 2.0);
  a.eps_ma = cfg.get_double_or("assume_eps_ma", 10.0);
  a.t_nom_nm = cfg.get_double_or("layer_t_nm", 10.0);
  a.eps_nom = cfg.get_double_or("layer_eps", 10.0);
  return a;
}

std::string samples_csv(const lossfit::LossFactorDistribution& dist) {
  std::ostringstream os;
  os << "x_ms,x_sa,x_ma,x_si\n";
  for (const auto& s : dist.samples) {
    os << io::fmt_full(s.x_ms) << ',' << io::fmt_full(s.x_sa) << ','
       << io::fmt_full(s.x_ma) << ',' << io::fmt_full(s.x_si) << "\n";
  }
  return os.str();
}

}  // namespace

void run_fit(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  ensure_out_dir(opts);
  FitInputs in = gather_fit_inputs(cfg, opts, log);

  const lossfit::ParticipationMatrix pm = lossfit::assemble(in.participations);
  if (pm.rows() < static_cast<std::size_t>(lossfit::kRegions)) {
    log << "warning: underdetermined system (" << pm.rows() << " geometr"
        << (pm.rows() == 1 ? "y" : "ies")
        << " for 4 loss factors); ranges will span the feasible set\n";
  }
  log << "condition_number=" << io::fmt_g(pm.condition_number) << "\n";
  log << "column_correlation_MS_SA=" << io::fmt_g(pm.column_correlation[0][1])
      << "\n";

  const long long iterations =
      opts.iterations > 0 ? opts.iterations : cfg.get_int_or("fit_iterations", 10000);
  const auto dist = lossfit::monte_carlo_extract(
      pm, in.stats, static_cast<int>(iterations), opts.seed);

  io::write_file(out_path(opts, "loss_factor_samples.csv"), samples_csv(dist));

  const auto assume = assumptions_from_config(cfg);
  const auto tangents = lossfit::to_loss_tangents(dist.mean, assume);

  // Loss-tangent table with per-interface ranges propagated through the same
  // conversion.
  {
    std::ostringstream os;
    os << "region,tan_delta_mean,tan_delta_lo95,tan_delta_hi95\n";
    lossfit::LossFactorVector lo, hi;
    for (int c = 0; c < lossfit::kRegions; ++c) {
      lo[c] = dist.range95[c].first;
      hi[c] = dist.range95[c].second;
    }
    const auto t_lo = lossfit::to_loss_tangents(lo, assume);
    const auto t_hi = lossfit::to_loss_tangents(hi, assume);
    os << "MS," << io::fmt_g(tangents.ms) << ',' << io::fmt_g(t_lo.ms) << ','
       << io::fmt_g(t_hi.ms) << "\n";
    os << "SA," << io::fmt_g(tangents.sa) << ',' << io::fmt_g(t_lo.sa) << ','
       << io::fmt_g(t_hi.sa) << "\n";
    os << "MA," << io::fmt_g(tangents.ma) << ',' << io::fmt_g(t_lo.ma) << ','
       << io::fmt_g(t_hi.ma) << "\n";
    os << "Si," << io::fmt_g(tangents.si) << ',' << io::fmt_g(t_lo.si) << ','
       << io::fmt_g(t_hi.si) << "\n";
    io::write_file(out_path(opts, "loss_tangents.csv"), os.str());
  }

  // Predicted vs measured.
  {
    std::ostringstream os;
    os << "geometry_id,measured_mean,measured_lo95,measured_hi95,"
          "predicted_mean,predicted_lo95,predicted_hi95\n";
    for (std::size_t r = 0; r < pm.rows(); ++r) {
      const auto pred = lossfit::predict_qtls(in.participations[r].second, dist);
      const auto& st = in.stats[r];
      os << pm.geometry_ids[r] << ',' << io::fmt_g(st.mean_qtls) << ','
         << io::fmt_g(st.ci95_lo) << ',' << io::fmt_g(st.ci95_hi) << ','
         << io::fmt_g(pred.mean) << ',' << io::fmt_g(pred.lo95) << ','
         << io::fmt_g(pred.hi95) << "\n";
    }
    io::write_file(out_path(opts, "predicted_vs_measured.csv"), os.str());
  }

  // Structured summary.
  {
    nlohmann::ordered_json j;
    j["iterations"] = dist.iterations;
    j["seed"] = dist.seed;
    j["condition_number"] = pm.condition_number;
    for (int i = 0; i < lossfit::kRegions; ++i) {
      for (int k = i + 1; k < lossfit::kRegions; ++k) {
        j["column_correlation"][std::string(lossfit::kRegionNames[i]) + "_" +
                                lossfit::kRegionNames[k]] =
            pm.column_correlation[i][k];
      }
    }
    for (int c = 0; c < lossfit::kRegions; ++c) {
      nlohmann::ordered_json jc;
      jc["mean"] = dist.mean[c];
      jc["range95"] = {dist.range95[c].first, dist.range95[c].second};
      jc["minmax"] = {dist.minmax[c].first, dist.minmax[c].second};
      j["loss_factors"][lossfit::kRegionNames[c]] = jc;
    }
    j["loss_tangents"]["MS"] = tangents.ms;
    j["loss_tangents"]["SA"] = tangents.sa;
    j["loss_tangents"]["MA"] = tangents.ma;
    j["loss_tangents"]["Si"] = tangents.si;
    j["geometries"] = pm.geometry_ids;
    nlohmann::ordered_json stats_j = nlohmann::ordered_json::array();
    for (const auto& st : in.stats) {
      stats_j.push_back({{"geometry_id", st.geometry_id},
                         {"n", st.n},
                         {"mean_qtls", st.mean_qtls},
                         {"ci95_lo", st.ci95_lo},
                         {"ci95_hi", st.ci95_hi},
                         {"n_excluded", st.n_excluded},
                         {"yield_above_1e6", st.yield_above_1e6}});
    }
    j["measured"] = stats_j;
    io::write_file(out_path(opts, "fit_summary.json"), j.dump(2) + "\n");
  }

  log << "x_ms=" << io::fmt_g(dist.mean.x_ms) << " x_sa=" << io::fmt_g(dist.mean.x_sa)
      << " x_ma=" << io::fmt_g(dist.mean.x_ma) << " x_si=" << io::fmt_g(dist.mean.x_si)
      << "\n";
}

namespace {

lossfit::LossFactorDistribution load_distribution(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) {
    throw config_error("distribution CSV: empty file: " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x_ms,x_sa,x_ma,x_si") {
    throw config_error("distribution CSV row 1: bad header");
  }
  lossfit::LossFactorDistribution dist;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 4) {
      throw config_error("distribution CSV row " + std::to_string(line_no) +
                         ": expected 4 fields");
    }
    lossfit::LossFactorVector v;
    for (int c = 0; c < 4; ++c) {
      char* end = nullptr;
      v[c] = std::strtod(f[c].c_str(), &end);
      if (end != f[c].c_str() + f[c].size() || !(v[c] >= 0.0)) {
        throw config_error("distribution CSV row " + std::to_string(line_no) +
                           ": bad value '" + f[c] + "'");
      }
    }
    dist.samples.push_back(v);
  }
  if (dist.samples.empty()) {
    throw config_error("distribution CSV: no samples: " + path);
  }
  dist.iterations = static_cast<int>(dist.samples.size());
  for (int c = 0; c < lossfit::kRegions; ++c) {
    std::vector<double> comp(dist.samples.size());
    for (std::size_t i = 0; i < dist.samples.size(); ++i) comp[i] = dist.samples[i][c];
    dist.mean[c] = stats::mean(comp);
    dist.range95[c] = {stats::quantile(comp, 0.025), stats::quantile(comp, 0.975)};
    dist.minmax[c] = {*std::min_element(comp.begin(), comp.end()),
                      *std::max_element(comp.begin(), comp.end())};
  }
  return dist;
}

}  // namespace

void run_predict(const io::Config& cfg, const GlobalOptions& opts, std::ostream& log) {
  ensure_out_dir(opts);
  const std::string dist_path = cfg.get_string("distribution_csv");
  if (!std::filesystem::exists(dist_path)) {
    throw io_error("distribution file not found: " + dist_path);
  }
  const auto dist = load_distribution(dist_path);

  const InterfaceLayerSpec layers = layers_from_config(cfg);
  io::ParticipationCache cache(out_path(opts, "cache"), !opts.no_cache);

  if (cfg.has("depths_um") || cfg.has("depth_min_um")) {
    const std::vector<double> depths = depths_from_config(cfg);
    const CpwGeometry geom = sweep_template(cfg, opts, depths);
    const mesh::RefinementPolicy policy = policy_from_config(cfg, geom);
    CacheHook hook(cache, layers, policy);
    const auto sweep = participation::depth_sweep(geom, depths, layers, policy, &hook, opts.threads);
    std::ostringstream os;
    os << "depth_um,qtls_mean,qtls_lo95,qtls_hi95,n_excluded\n";
    io::SvgBand band;
    band.color = "#ff88aa";
    io::SvgSeries mean_series;
    mean_series.name = "predicted Q_TLS";
    mean_series.color = "#cc2255";
    for (std::size_t i = 0; i < depths.size(); ++i) {
      const auto pred = lossfit::predict_qtls(sweep.participation[i], dist);
      os << io::fmt_g(depths[i]) << ',' << io::fmt_g(pred.mean) << ','
         << io::fmt_g(pred.lo95) << ',' << io::fmt_g(pred.hi95) << ','
         << pred.n_excluded << "\n";
      band.upper.emplace_back(depths[i], pred.hi95);
      band.lower.emplace_back(depths[i], pred.lo95);
      mean_series.points.emplace_back(depths[i], pred.mean);
    }
    io::write_file(out_path(opts, "qtls_prediction.csv"), os.str());
    io::SvgPlotSpec plot;
    plot.title = "Predicted Q_TLS vs trench depth (w=" + io::fmt_g(geom.w) +
                 " um, g=" + io::fmt_g(geom.g) + " um)";
    plot.x_label = "trench depth (um)";
    plot.y_label = "Q_TLS";
    plot.band = band;
    plot.series.push_back(mean_series);
    io::write_file(out_path(opts, "qtls_prediction.svg"), io::render_svg(plot));
    log << "predicted Q_TLS band written for " << depths.size() << " depths\n";
  } else {
    const CpwGeometry geom = geometry_from_config(cfg, opts.domain_scale);
    const mesh::RefinementPolicy policy = policy_from_config(cfg, geom);
    const ParticipationVector p = cached_simulate(geom, layers, policy, cache);
    const auto pred = lossfit::predict_qtls(p, dist);
    std::ostringstream os;
    os << "qtls_mean,qtls_lo95,qtls_hi95,n_excluded\n";
    os << io::fmt_g(pred.mean) << ',' << io::fmt_g(pred.lo95) << ','
       << io::fmt_g(pred.hi95) << ',' << pred.n_excluded << "\n";
    io::write_file(out_path(opts, "qtls_prediction.csv"), os.str());
    log << "qtls_mean=" << io::fmt_g(pred.mean) << " qtls_lo95="
        << io::fmt_g(pred.lo95) << " qtls_hi95=" << io::fmt_g(pred.hi95) << "\n";
  }
}

void run_mesh_dump(const io::Config& cfg, const GlobalOptions& opts,
                   std::ostream& log) {
  ensure_out_dir(opts);
  const CpwGeometry geom = geometry_from_config(cfg, opts.domain_scale);
  const mesh::RefinementPolicy policy = policy_from_config(cfg, geom);
  std::optional<InterfaceLayerSpec> layers;
  if (cfg.has("layer_t_nm")) layers = layers_from_config(cfg);
  const geometry::RegionMap regions = geometry::build_cross_section(geom, layers);
  const mesh::Mesh m = mesh::generate_mesh(regions, policy);
  std::ostringstream os;
  mesh::write_mesh_text(m, os);
  io::write_file(out_path(opts, "mesh.txt"), os.str());
  log << "nodes=" << m.nodes.size() << " triangles=" << m.triangles.size()
      << " boundary_edges=" << m.boundary_edges.size() << "\n";
}

}  // namespace cpwloss::cli
