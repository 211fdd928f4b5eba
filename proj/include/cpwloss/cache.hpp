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

#ifndef CPWLOSS_CACHE_HPP_
#define CPWLOSS_CACHE_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "cpwloss/geometry.hpp"
#include "cpwloss/mesh.hpp"
#include "cpwloss/participation.hpp"

namespace cpwloss::io {

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

// Content-addressed store of simulated participation vectors. The key hashes
// the geometry, layer spec, mesh policy, and a schema version, so any change
// in inputs misses cleanly. One small text file per entry under `dir`.
class ParticipationCache {
 public:
  ParticipationCache(std::string dir, bool enabled);

  static std::string key_of(const geometry::CpwGeometry& geom,
                            const geometry::InterfaceLayerSpec& layers,
                            const mesh::RefinementPolicy& policy);

  std::optional<participation::ParticipationVector> lookup(
      const std::string& key) const;
  void store(const std::string& key,
             const participation::ParticipationVector& p) const;

  bool enabled() const { return enabled_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  bool enabled_;
};

}  // namespace cpwloss::io

#endif  // CPWLOSS_CACHE_HPP_
