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

#include "cpwloss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cpwloss/error.hpp"

namespace cpwloss::stats {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw numerical_error("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

// Continued-fraction evaluation for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;

  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return h;
}

}  // namespace

double beta_incomplete(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_critical(double level, int df) {
  if (df < 1) throw numerical_error("student_t_critical: df must be >= 1");
  if (level <= 0.0 || level >= 1.0) {
    throw numerical_error("student_t_critical: level must be in (0, 1)");
  }
  // P(|T| <= t) = 1 - I_{df/(df+t^2)}(df/2, 1/2); monotone in t, bisect.
  const double target = level;
  auto two_sided = [&](double t) {
    const double x = df / (df + t * t);
    return 1.0 - beta_incomplete(0.5 * df, 0.5, x);
  };
  double lo = 0.0, hi = 1.0;
  while (two_sided(hi) < target) {
    hi *= 2.0;
    if (hi > 1e12) throw numerical_error("student_t_critical: no convergence");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (two_sided(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MeanCi mean_confidence(const std::vector<double>& xs, double level) {
  if (xs.empty()) throw numerical_error("mean_confidence of empty sample");
  MeanCi out;
  out.mean = mean(xs);
  const int n = static_cast<int>(xs.size());
  if (n == 1) {
    out.lo = out.hi = out.mean;
    return out;
  }
  const double s = sample_stddev(xs);
  if (s == 0.0) {
    out.lo = out.hi = out.mean;
    return out;
  }
  const double t = student_t_critical(level, n - 1);
  const double half = t * s / std::sqrt(static_cast<double>(n));
  out.lo = out.mean - half;
  out.hi = out.mean + half;
  return out;
}

double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw numerical_error("pearson_correlation: need two samples of equal size >= 2");
  }
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw numerical_error("pearson_correlation: zero-variance sample");
  }
  return sxy / std::sqrt(sxx * syy);
}

double linear_r_squared(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  const double r = pearson_correlation(xs, ys);
  return r * r;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw numerical_error("quantile of empty sample");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(i);
  return xs[i] * (1.0 - frac) + xs[i + 1] * frac;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(seed) {
  // Warm up so small seeds decorrelate.
  splitmix64(state_);
  splitmix64(state_);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : state_(seed) {
  splitmix64(state_);
  state_ ^= 0x6a09e667f3bcc909ULL + stream * 0x2545f4914f6cdd1dULL;
  splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  // Avoid log(0).
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

double Rng::gaussian(double mean, double sigma) {
  return mean + sigma * gaussian();
}

}  // namespace cpwloss::stats
