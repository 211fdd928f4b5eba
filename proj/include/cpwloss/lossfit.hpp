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

#ifndef CPWLOSS_LOSSFIT_HPP_
#define CPWLOSS_LOSSFIT_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpwloss/participation.hpp"
#include "cpwloss/qdata.hpp"

namespace cpwloss::lossfit {

// Region columns are fixed: [MS, SA, MA, Si].
inline constexpr int kRegions = 4;
inline constexpr const char* kRegionNames[kRegions] = {"MS", "SA", "MA", "Si"};

struct ParticipationMatrix {
  std::vector<std::string> geometry_ids;                 // rows
  std::vector<std::array<double, kRegions>> values;      // row-major
  double condition_number = 0.0;                         // 2-norm; inf sentinel
  std::array<std::array<double, kRegions>, kRegions> column_correlation{};

  std::size_t rows() const { return values.size(); }
};

ParticipationMatrix assemble(
    const std::vector<std::pair<std::string, participation::ParticipationVector>>&
        participations);

struct LossFactorVector {
  double x_ms = 0.0, x_sa = 0.0, x_ma = 0.0, x_si = 0.0;
  double operator[](int i) const {
    return i == 0 ? x_ms : i == 1 ? x_sa : i == 2 ? x_ma : x_si;
  }
  double& operator[](int i) {
    return i == 0 ? x_ms : i == 1 ? x_sa : i == 2 ? x_ma : x_si;
  }
};

// Generic dense non-negative least squares (Lawson-Hanson active set) with a
// KKT optimality check on exit. Row-major A of size rows x cols.
std::vector<double> nnls(const std::vector<std::vector<double>>& a,
                         const std::vector<double>& b);

LossFactorVector nnls_solve(const ParticipationMatrix& p,
                            const std::vector<double>& inv_q);

struct LossFactorDistribution {
  std::vector<LossFactorVector> samples;
  LossFactorVector mean;
  std::array<std::pair<double, double>, kRegions> range95;  // central 95%
  std::array<std::pair<double, double>, kRegions> minmax;
  int iterations = 0;
  std::uint64_t seed = 0;
};

LossFactorDistribution monte_carlo_extract(const ParticipationMatrix& p,
                                           const std::vector<qdata::QtlsStat>& stats,
                                           int iterations, std::uint64_t seed);

// Assumed physical properties of each interface layer, for converting loss
// factors back to loss tangents. MS and MA are perpendicular-field layers,
// SA is parallel.
struct InterfaceAssumptions {
  double t_ms_nm = 2.0, eps_ms = 11.7;
  double t_sa_nm = 2.0, eps_sa = 4.0;
  double t_ma_nm = 2.0, eps_ma = 10.0;
  double t_nom_nm = 10.0, eps_nom = 10.0;
};

struct LossTangents {
  double ms = 0.0, sa = 0.0, ma = 0.0, si = 0.0;
};

LossTangents to_loss_tangents(const LossFactorVector& x,
                              const InterfaceAssumptions& assume);

struct PredictedQ {
  double mean = 0.0;
  double lo95 = 0.0;
  double hi95 = 0.0;
  int n_used = 0;
  int n_excluded = 0;  // all-zero loss samples (infinite Q)
};

PredictedQ predict_qtls(const participation::ParticipationVector& p,
                        const LossFactorDistribution& dist);

// Forward model: 1/Q for one participation row and one loss-factor vector.
double inverse_q(const std::array<double, kRegions>& p_row,
                 const LossFactorVector& x);

std::array<double, kRegions> participation_row(
    const participation::ParticipationVector& p);

}  // namespace cpwloss::lossfit

#endif  // CPWLOSS_LOSSFIT_HPP_
