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

#include "cpwloss/cache.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cpwloss/csvio.hpp"
#include "cpwloss/error.hpp"

namespace cpwloss::io {

namespace {
constexpr int kSchemaVersion = 1;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ParticipationCache::ParticipationCache(std::string dir, bool enabled)
    : dir_(std::move(dir)), enabled_(enabled) {
  if (enabled_) std::filesystem::create_directories(dir_);
}

std::string ParticipationCache::key_of(const geometry::CpwGeometry& geom,
                                       const geometry::InterfaceLayerSpec& layers,
                                       const mesh::RefinementPolicy& policy) {
  std::ostringstream os;
  os << "schema=" << kSchemaVersion << '\n'
     << "w=" << fmt_full(geom.w) << "\ng=" << fmt_full(geom.g)
     << "\nd=" << fmt_full(geom.d) << "\nphi=" << fmt_full(geom.phi_deg)
     << "\ntm=" << fmt_full(geom.t_metal)
     << "\neps=" << fmt_full(geom.eps_substrate)
     << "\nhw=" << fmt_full(geom.domain_halfwidth)
     << "\nhh=" << fmt_full(geom.domain_height)
     << "\nlt=" << fmt_full(layers.t_nm) << "\nle=" << fmt_full(layers.eps_nom)
     << "\nhmax=" << fmt_full(policy.h_max) << "\nhedge=" << fmt_full(policy.h_edge)
     << "\ngrading=" << fmt_full(policy.grading)
     << "\nlayer_elements=" << policy.layer_elements
     << "\nlayer_aspect=" << fmt_full(policy.layer_aspect)
     << "\nmin_angle=" << fmt_full(policy.min_angle_deg) << '\n';
  return hex64(fnv1a64(os.str()));
}

std::optional<participation::ParticipationVector> ParticipationCache::lookup(
    const std::string& key) const {
  if (!enabled_) return std::nullopt;
  const std::string path = dir_ + "/" + key + ".txt";
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::istringstream in(read_file(path));
  participation::ParticipationVector p;
  std::string name;
  double value;
  while (in >> name >> value) {
    if (name == "p_ms_perp") p.p_ms_perp = value;
    else if (name == "p_ms_par") p.p_ms_par = value;
    else if (name == "p_sa_par") p.p_sa_par = value;
    else if (name == "p_sa_perp") p.p_sa_perp = value;
    else if (name == "p_ma_perp") p.p_ma_perp = value;
    else if (name == "p_ma_par") p.p_ma_par = value;
    else if (name == "p_si") p.p_si = value;
    else if (name == "p_vac") p.p_vac = value;
    else if (name == "layer_t_nm") p.layer_spec.t_nm = value;
    else if (name == "layer_eps") p.layer_spec.eps_nom = value;
    else if (name == "w") p.geometry.w = value;
    else if (name == "g") p.geometry.g = value;
    else if (name == "d") p.geometry.d = value;
    else if (name == "phi") p.geometry.phi_deg = value;
    else if (name == "t_metal") p.geometry.t_metal = value;
    else if (name == "eps_substrate") p.geometry.eps_substrate = value;
    else if (name == "domain_halfwidth") p.geometry.domain_halfwidth = value;
    else if (name == "domain_height") p.geometry.domain_height = value;
  }
  p.method = participation::Method::kPerturbative;
  return p;
}

void ParticipationCache::store(const std::string& key,
                               const participation::ParticipationVector& p) const {
  if (!enabled_) return;
  std::ostringstream os;
  os << "p_ms_perp " << fmt_full(p.p_ms_perp) << '\n'
     << "p_ms_par " << fmt_full(p.p_ms_par) << '\n'
     << "p_sa_par " << fmt_full(p.p_sa_par) << '\n'
     << "p_sa_perp " << fmt_full(p.p_sa_perp) << '\n'
     << "p_ma_perp " << fmt_full(p.p_ma_perp) << '\n'
     << "p_ma_par " << fmt_full(p.p_ma_par) << '\n'
     << "p_si " << fmt_full(p.p_si) << '\n'
     << "p_vac " << fmt_full(p.p_vac) << '\n'
     << "layer_t_nm " << fmt_full(p.layer_spec.t_nm) << '\n'
     << "layer_eps " << fmt_full(p.layer_spec.eps_nom) << '\n'
     << "w " << fmt_full(p.geometry.w) << '\n'
     << "g " << fmt_full(p.geometry.g) << '\n'
     << "d " << fmt_full(p.geometry.d) << '\n'
     << "phi " << fmt_full(p.geometry.phi_deg) << '\n'
     << "t_metal " << fmt_full(p.geometry.t_metal) << '\n'
     << "eps_substrate " << fmt_full(p.geometry.eps_substrate) << '\n'
     << "domain_halfwidth " << fmt_full(p.geometry.domain_halfwidth) << '\n'
     << "domain_height " << fmt_full(p.geometry.domain_height) << '\n';
  write_file(dir_ + "/" + key + ".txt", os.str());
}

}  // namespace cpwloss::io
