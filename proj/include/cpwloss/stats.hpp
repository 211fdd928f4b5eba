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

#ifndef CPWLOSS_STATS_HPP_
#define CPWLOSS_STATS_HPP_

#include <cstdint>
#include <vector>

namespace cpwloss::stats {

double mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

// Regularized incomplete beta function I_x(a, b).
double beta_incomplete(double a, double b, double x);

// Two-sided Student-t critical value: P(|T_df| <= t) = level.
double student_t_critical(double level, int df);

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Mean with symmetric Student-t confidence interval on the mean.
// n == 1 or zero spread collapse the interval to a point.
MeanCi mean_confidence(const std::vector<double>& xs, double level = 0.95);

double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys);

// Coefficient of determination of the ordinary least-squares line y ~ a + b x.
double linear_r_squared(const std::vector<double>& xs,
                        const std::vector<double>& ys);

// Linearly interpolated quantile of a sample, q in [0, 1].
double quantile(std::vector<double> xs, double q);

// Deterministic counter-free PRNG. One instance per Monte Carlo iteration,
// seeded from (seed, stream) so iterations are order-independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();              // [0, 1)
  double gaussian();             // standard normal, Box-Muller
  double gaussian(double mean, double sigma);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cpwloss::stats

#endif  // CPWLOSS_STATS_HPP_
