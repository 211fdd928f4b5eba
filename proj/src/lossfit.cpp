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

#include "cpwloss/lossfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpwloss/error.hpp"
#include "cpwloss/stats.hpp"

namespace cpwloss::lossfit {

using participation::ParticipationVector;

std::array<double, kRegions> participation_row(const ParticipationVector& p) {
  // The dominance approximations: each interface is represented by its
  // dominant field orientation.
  return {p.p_ms_perp, p.p_sa_par, p.p_ma_perp, p.p_si};
}

ParticipationMatrix assemble(
    const std::vector<std::pair<std::string, ParticipationVector>>& participations) {
  if (participations.empty()) {
    throw config_error("assemble: no participation rows");
  }
  ParticipationMatrix m;
  for (const auto& [id, p] : participations) {
    m.geometry_ids.push_back(id);
    const auto row = participation_row(p);
    for (double v : row) {
      if (!(v >= 0.0)) {
        throw config_error("assemble: negative participation for geometry '" +
                           id + "'");
      }
    }
    m.values.push_back(row);
  }

  const std::size_t rows = m.rows();
  Eigen::MatrixXd a(rows, kRegions);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < kRegions; ++c) a(r, c) = m.values[r][c];
  }

  if (rows < static_cast<std::size_t>(kRegions)) {
    m.condition_number = std::numeric_limits<double>::infinity();
  } else {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    m.condition_number = smin > 0.0 ? smax / smin
                                    : std::numeric_limits<double>::infinity();
  }

  for (int i = 0; i < kRegions; ++i) {
    for (int j = 0; j < kRegions; ++j) {
      if (i == j || rows < 2) {
        m.column_correlation[i][j] = i == j ? 1.0 : 0.0;
        continue;
      }
      std::vector<double> ci(rows), cj(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        ci[r] = m.values[r][i];
        cj[r] = m.values[r][j];
      }
      double corr = 0.0;
      try {
        corr = stats::pearson_correlation(ci, cj);
      } catch (const Error&) {
        corr = 0.0;  // zero-variance column
      }
      m.column_correlation[i][j] = corr;
    }
  }
  return m;
}

std::vector<double> nnls(const std::vector<std::vector<double>>& a_rows,
                         const std::vector<double>& b_vec) {
  const int rows = static_cast<int>(a_rows.size());
  if (rows == 0 || b_vec.size() != a_rows.size()) {
    throw config_error("nnls: dimension mismatch");
  }
  const int cols = static_cast<int>(a_rows[0].size());
  Eigen::MatrixXd a(rows, cols);
  Eigen::VectorXd b(rows);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(a_rows[r].size()) != cols) {
      throw config_error("nnls: ragged matrix");
    }
    for (int c = 0; c < cols; ++c) a(r, c) = a_rows[r][c];
    b(r) = b_vec[r];
  }

  // Lawson-Hanson active set. P = passive (positive) set, Z = active (zero).
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
  std::vector<bool> passive(cols, false);
  const double scale = std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
  const double tol = 1e-13 * scale;

  auto solve_passive = [&](const std::vector<bool>& mask) {
    std::vector<int> idx;
    for (int c = 0; c < cols; ++c) {
      if (mask[c]) idx.push_back(c);
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(cols);
    if (idx.empty()) return z;
    Eigen::MatrixXd ap(rows, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(k) = a.col(idx[k]);
    const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[k];
    return z;
  };

  const int max_outer = 3 * cols + 10;
  for (int outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    int best = -1;
    double wmax = tol;
    for (int c = 0; c < cols; ++c) {
      if (!passive[c] && w[c] > wmax) {
        wmax = w[c];
        best = c;
      }
    }
    if (best < 0) break;  // KKT satisfied
    passive[best] = true;

    Eigen::VectorXd z = solve_passive(passive);
    int inner_guard = 0;
    while (true) {
      if (++inner_guard > 10 * cols + 20) {
        throw numerical_error("nnls: inner loop did not converge");
      }
      double alpha = std::numeric_limits<double>::infinity();
      bool all_positive = true;
      for (int c = 0; c < cols; ++c) {
        if (!passive[c]) continue;
        if (z[c] <= 0.0) {
          all_positive = false;
          const double t = x[c] / (x[c] - z[c]);
          alpha = std::min(alpha, t);
        }
      }
      if (all_positive) break;
      for (int c = 0; c < cols; ++c) {
        if (passive[c]) x[c] += alpha * (z[c] - x[c]);
      }
      for (int c = 0; c < cols; ++c) {
        if (passive[c] && x[c] <= tol * 1e-3) {
          x[c] = 0.0;
          passive[c] = false;
        }
      }
      z = solve_passive(passive);
    }
    x = z;
    for (int c = 0; c < cols; ++c) {
      if (!passive[c]) x[c] = 0.0;
    }
  }

  // KKT post-check: gradient of 0.5||Ax-b||^2 is g = A^T(Ax - b).
  const Eigen::VectorXd g = a.transpose() * (a * x - b);
  for (int c = 0; c < cols; ++c) {
    if (x[c] > 0.0) {
      if (std::fabs(g[c]) > 1e-8 * scale) {
        throw numerical_error("nnls: KKT stationarity violated");
      }
    } else {
      if (g[c] < -1e-8 * scale && g[c] < -1e-12) {
        throw numerical_error("nnls: KKT dual feasibility violated");
      }
    }
  }

  std::vector<double> out(cols);
  for (int c = 0; c < cols; ++c) out[c] = std::max(0.0, x[c]);
  return out;
}

LossFactorVector nnls_solve(const ParticipationMatrix& p,
                            const std::vector<double>& inv_q) {
  if (p.rows() != inv_q.size()) {
    throw config_error("nnls_solve: row count of P (" + std::to_string(p.rows()) +
                       ") != length of 1/Q vector (" +
                       std::to_string(inv_q.size()) + ")");
  }
  for (double v : inv_q) {
    if (!(v > 0.0)) throw config_error("nnls_solve: 1/Q entries must be > 0");
  }
  std::vector<std::vector<double>> a;
  a.reserve(p.rows());
  for (const auto& row : p.values) {
    a.emplace_back(row.begin(), row.end());
  }
  const std::vector<double> x = nnls(a, inv_q);
  LossFactorVector out;
  for (int c = 0; c < kRegions; ++c) out[c] = x[c];
  return out;
}

double inverse_q(const std::array<double, kRegions>& p_row,
                 const LossFactorVector& x) {
  double s = 0.0;
  for (int c = 0; c < kRegions; ++c) s += p_row[c] * x[c];
  return s;
}

LossFactorDistribution monte_carlo_extract(const ParticipationMatrix& p,
                                           const std::vector<qdata::QtlsStat>& stats_in,
                                           int iterations, std::uint64_t seed) {
  if (stats_in.size() != p.rows()) {
    throw config_error("monte_carlo_extract: stats not aligned with P rows");
  }
  if (iterations < 1) {
    throw config_error("monte_carlo_extract: iterations must be >= 1");
  }

  LossFactorDistribution dist;
  dist.iterations = iterations;
  dist.seed = seed;
  dist.samples.reserve(iterations);

  const std::size_t rows = p.rows();
  std::vector<double> sigma(rows), mean(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    mean[r] = stats_in[r].mean_qtls;
    sigma[r] = (stats_in[r].ci95_hi - stats_in[r].ci95_lo) / (2.0 * 1.96);
    if (!(mean[r] > 0.0)) {
      throw config_error("monte_carlo_extract: non-positive mean Q_TLS for row " +
                         std::to_string(r));
    }
  }

  // Truncated-at-zero sampling: failed draws are redrawn, with the total
  // number of rejections capped at 10x the iteration count.
  long long reject_budget = 10LL * iterations;
  for (int it = 0; it < iterations; ++it) {
    stats::Rng rng(seed, static_cast<std::uint64_t>(it));
    std::vector<double> inv_q(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double q = sigma[r] > 0.0 ? rng.gaussian(mean[r], sigma[r]) : mean[r];
      while (!(q > 0.0)) {
        if (--reject_budget < 0) {
          throw numerical_error(
              "monte_carlo_extract: resampling budget exhausted (Q_TLS "
              "distributions are not meaningfully positive)");
        }
        q = rng.gaussian(mean[r], sigma[r]);
      }
      inv_q[r] = 1.0 / q;
    }
    std::vector<std::vector<double>> a;
    a.reserve(rows);
    for (const auto& row : p.values) a.emplace_back(row.begin(), row.end());
    const std::vector<double> x = nnls(a, inv_q);
    LossFactorVector v;
    for (int c = 0; c < kRegions; ++c) v[c] = x[c];
    dist.samples.push_back(v);
  }

  for (int c = 0; c < kRegions; ++c) {
    std::vector<double> comp(dist.samples.size());
    for (std::size_t i = 0; i < dist.samples.size(); ++i) comp[i] = dist.samples[i][c];
    dist.mean[c] = stats::mean(comp);
    dist.range95[c] = {stats::quantile(comp, 0.025), stats::quantile(comp, 0.975)};
    dist.minmax[c] = {*std::min_element(comp.begin(), comp.end()),
                      *std::max_element(comp.begin(), comp.end())};
  }
  return dist;
}

LossTangents to_loss_tangents(const LossFactorVector& x,
                              const InterfaceAssumptions& assume) {
  for (double t : {assume.t_ms_nm, assume.t_sa_nm, assume.t_ma_nm, assume.t_nom_nm}) {
    if (!(t > 0.0)) {
      throw config_error("to_loss_tangents: thicknesses must be positive");
    }
  }
  for (double e : {assume.eps_ms, assume.eps_sa, assume.eps_ma, assume.eps_nom}) {
    if (!(e > 0.0)) {
      throw config_error("to_loss_tangents: permittivities must be positive");
    }
  }
  auto scale_perp = [&](double t_nm, double eps) {
    return (t_nm / assume.t_nom_nm) / (eps / assume.eps_nom);
  };
  auto scale_par = [&](double t_nm, double eps) {
    return (t_nm / assume.t_nom_nm) / (assume.eps_nom / eps);
  };
  LossTangents out;
  out.ms = x.x_ms / scale_perp(assume.t_ms_nm, assume.eps_ms);
  out.sa = x.x_sa / scale_par(assume.t_sa_nm, assume.eps_sa);
  out.ma = x.x_ma / scale_perp(assume.t_ma_nm, assume.eps_ma);
  out.si = x.x_si;
  return out;
}

PredictedQ predict_qtls(const ParticipationVector& p,
                        const LossFactorDistribution& dist) {
  if (dist.samples.empty()) {
    throw config_error("predict_qtls: empty loss-factor distribution");
  }
  const auto row = participation_row(p);
  PredictedQ out;
  std::vector<double> qs;
  qs.reserve(dist.samples.size());
  for (const LossFactorVector& x : dist.samples) {
    const double inv = inverse_q(row, x);
    if (!(inv > 0.0)) {
      ++out.n_excluded;  // lossless sample: infinite Q
      continue;
    }
    qs.push_back(1.0 / inv);
  }
  if (qs.empty()) {
    throw numerical_error("predict_qtls: every sample predicted infinite Q");
  }
  out.n_used = static_cast<int>(qs.size());
  out.mean = stats::mean(qs);
  out.lo95 = stats::quantile(qs, 0.025);
  out.hi95 = stats::quantile(qs, 0.975);
  return out;
}

}  // namespace cpwloss::lossfit
