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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cpwloss/error.hpp"
#include "cpwloss/qdata.hpp"
#include "cpwloss/stats.hpp"

using namespace cpwloss;
using qdata::DeviceRecord;

TEST_CASE("qtls_correct arithmetic and limits") {
  CHECK(qdata::qtls_correct(1.0e6, 3.0e6) == doctest::Approx(1.5e6).epsilon(1e-12));
  CHECK(qdata::qtls_correct(1.0e6, std::numeric_limits<double>::infinity()) ==
        1.0e6);
  CHECK_THROWS_AS(qdata::qtls_correct(1.0e6, 1.0e6), Error);
  CHECK_THROWS_AS(qdata::qtls_correct(2.0e6, 1.0e6), Error);
  CHECK_THROWS_AS(qdata::qtls_correct(-1.0, 2.0), Error);
}

TEST_CASE("qtls_correct properties") {
  stats::Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const double q_lp = 1e4 + rng.uniform() * 1e7;
    const double q_hp = q_lp * (1.0 + 1e-6 + rng.uniform() * 10.0);
    const double q_tls = qdata::qtls_correct(q_lp, q_hp);
    // Correction always removes loss: Q_TLS > Q_LP for finite Q_HP.
    CHECK(q_tls > q_lp);
    // Increasing q_lp at fixed q_hp increases Q_TLS.
    const double q_lp2 = q_lp * 1.01;
    if (q_lp2 < q_hp) {
      CHECK(qdata::qtls_correct(q_lp2, q_hp) > q_tls);
    }
    // Q_TLS -> Q_LP as Q_HP -> infinity.
    CHECK(qdata::qtls_correct(q_lp, q_hp * 1e9) ==
          doctest::Approx(q_lp).epsilon(1e-6));
  }
}

namespace {

DeviceRecord rec(const std::string& dev, const std::string& geo, double q_lp,
                 double q_hp) {
  DeviceRecord r;
  r.device_id = dev;
  r.geometry_id = geo;
  r.w = 16;
  r.g = 8;
  r.d = 0.68;
  r.phi = 100;
  r.q_lp = q_lp;
  r.q_hp = q_hp;
  return r;
}

}  // namespace

TEST_CASE("aggregate basics") {
  std::vector<DeviceRecord> rs = {rec("a", "G1", 1e6, 3e6), rec("b", "G1", 1e6, 3e6),
                                  rec("c", "G1", 1e6, 3e6)};
  const auto st = qdata::aggregate(rs, "G1");
  CHECK(st.n == 3);
  CHECK(st.mean_qtls == doctest::Approx(1.5e6));
  CHECK(st.ci95_lo == st.mean_qtls);  // identical records: zero-width CI
  CHECK(st.ci95_hi == st.mean_qtls);

  // Permutation invariance.
  std::vector<DeviceRecord> shuffled = {rs[2], rs[0], rs[1]};
  const auto st2 = qdata::aggregate(shuffled, "G1");
  CHECK(st2.mean_qtls == st.mean_qtls);
  CHECK(st2.ci95_lo == st.ci95_lo);
}

TEST_CASE("aggregate policies for non-physical records") {
  std::vector<DeviceRecord> rs = {rec("a", "G1", 1e6, 3e6),
                                  rec("b", "G1", 2e6, 1.5e6)};  // inverted
  const auto excl = qdata::aggregate(rs, "G1", qdata::InvalidRecordPolicy::kExclude);
  CHECK(excl.n == 1);
  CHECK(excl.n_excluded == 1);
  const auto clamp = qdata::aggregate(rs, "G1", qdata::InvalidRecordPolicy::kClamp);
  CHECK(clamp.n == 2);
  CHECK(clamp.mean_qtls == doctest::Approx(0.5 * (1.5e6 + 10.0 * 2e6)));

  std::vector<DeviceRecord> all_bad = {rec("a", "G1", 2e6, 1e6)};
  CHECK_THROWS_AS(qdata::aggregate(all_bad, "G1"), Error);
}

TEST_CASE("confidence interval shrinks like 1/sqrt(n)") {
  stats::Rng rng(2024);
  std::vector<double> log_n, log_w;
  for (const int n : {5, 10, 20, 40}) {
    double mean_width = 0.0;
    const int repeats = 300;
    for (int rep = 0; rep < repeats; ++rep) {
      std::vector<DeviceRecord> rs;
      for (int i = 0; i < n; ++i) {
        // Gaussian Q_TLS scatter around 2e6, converted back through q_hp.
        const double q_tls = rng.gaussian(2.0e6, 2.0e5);
        const double q_hp = 8.0e6;
        const double q_lp = 1.0 / (1.0 / q_tls + 1.0 / q_hp);
        rs.push_back(rec("d" + std::to_string(i), "G", q_lp, q_hp));
      }
      const auto st = qdata::aggregate(rs, "G");
      mean_width += st.ci95_hi - st.ci95_lo;
    }
    mean_width /= repeats;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_w.push_back(std::log(mean_width));
  }
  // Slope of log(width) vs log(n) should be close to -1/2.
  const double n_mean = (log_n[0] + log_n[1] + log_n[2] + log_n[3]) / 4.0;
  const double w_mean = (log_w[0] + log_w[1] + log_w[2] + log_w[3]) / 4.0;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 4; ++i) {
    num += (log_n[i] - n_mean) * (log_w[i] - w_mean);
    den += (log_n[i] - n_mean) * (log_n[i] - n_mean);
  }
  const double slope = num / den;
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.15));
}

TEST_CASE("yield statistic matches the ensemble") {
  std::vector<DeviceRecord> rs;
  for (int i = 0; i < 100; ++i) {
    const double q_lp = i < 87 ? 1.6e6 : 0.8e6;
    rs.push_back(rec("d" + std::to_string(i), "G", q_lp, 8e6));
  }
  const auto st = qdata::aggregate(rs, "G");
  CHECK(st.yield_above_1e6 == doctest::Approx(0.87));
  CHECK(st.mean_qtls > st.n * 0);  // aggregate ran
  // The corrected mean always exceeds the raw low-power mean.
  double mean_q_lp = 0.0;
  for (const auto& r : rs) mean_q_lp += r.q_lp;
  mean_q_lp /= rs.size();
  CHECK(st.mean_qtls > mean_q_lp);
}

TEST_CASE("highest-Q ensemble statistics are plausible") {
  // Fifteen nominally identical resonators around a mean internal Q of
  // 2.2e6: the high-power correction always raises the TLS-limited value
  // above the raw low-power mean.
  stats::Rng rng(2026);
  std::vector<DeviceRecord> rs;
  double mean_q_lp = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double q_lp = rng.gaussian(2.2e6, 1.5e5);
    const double q_hp = 9e6;
    rs.push_back(rec("r" + std::to_string(i), "hq", q_lp, q_hp));
    mean_q_lp += q_lp;
  }
  mean_q_lp /= 15.0;
  const auto st = qdata::aggregate(rs, "hq");
  CHECK(st.n == 15);
  CHECK(st.mean_qtls > mean_q_lp);
  CHECK(st.mean_qtls > 2.2e6);
  CHECK(st.ci95_lo <= st.mean_qtls);
  CHECK(st.mean_qtls <= st.ci95_hi);
  CHECK(st.yield_above_1e6 == 1.0);
}

TEST_CASE("parse_measurements handles the documented cases") {
  SUBCASE("empty file with a valid header") {
    std::istringstream in(std::string(qdata::kMeasurementHeader) + "\n");
    const auto rep = qdata::parse_measurements(in);
    CHECK(rep.records.empty());
    CHECK(rep.rejects.empty());
  }
  SUBCASE("bad header") {
    std::istringstream in("dev,geo\n");
    CHECK_THROWS_AS(qdata::parse_measurements(in), Error);
  }
  SUBCASE("negative Q goes to the rejects with the line number") {
    std::istringstream in(std::string(qdata::kMeasurementHeader) +
                          "\nr1,G1,16,8,0.68,100,-5,3e6\n"
                          "r2,G1,16,8,0.68,100,1e6,3e6\n");
    const auto rep = qdata::parse_measurements(in);
    CHECK(rep.records.size() == 1);
    REQUIRE(rep.rejects.size() == 1);
    CHECK(rep.rejects[0].line == 2);
  }
  SUBCASE("mostly-rejected file is refused") {
    std::string text(qdata::kMeasurementHeader);
    text += "\n";
    for (int i = 0; i < 10; ++i) text += "r,G,16,8,0.68,100,bogus,3e6\n";
    text += "ok,G,16,8,0.68,100,1e6,3e6\n";
    std::istringstream in(text);
    CHECK_THROWS_AS(qdata::parse_measurements(in), Error);
  }
  SUBCASE("infinite q_hp sentinel") {
    std::istringstream in(std::string(qdata::kMeasurementHeader) +
                          "\nr1,G1,16,8,0.68,100,1e6,inf\n");
    const auto rep = qdata::parse_measurements(in);
    REQUIRE(rep.records.size() == 1);
    CHECK(std::isinf(rep.records[0].q_hp));
  }
}

TEST_CASE("emit/parse round trip is exact") {
  stats::Rng rng(7);
  std::vector<DeviceRecord> rs;
  for (int i = 0; i < 100; ++i) {
    DeviceRecord r;
    r.device_id = "dev" + std::to_string(i);
    r.geometry_id = "geo" + std::to_string(i % 7);
    r.w = 3.0 + rng.uniform() * 19.0;
    r.g = 1.5 + rng.uniform() * 9.5;
    r.d = rng.uniform() * 2.2;
    r.phi = 93.0 + rng.uniform() * 16.0;
    r.q_lp = 1e5 + rng.uniform() * 5e6;
    r.q_hp = r.q_lp * (1.0 + rng.uniform() * 10.0);
    rs.push_back(r);
  }
  std::ostringstream out;
  qdata::emit_measurements(out, rs);
  std::istringstream in(out.str());
  const auto rep = qdata::parse_measurements(in);
  CHECK(rep.rejects.empty());
  REQUIRE(rep.records.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(rep.records[i].device_id == rs[i].device_id);
    CHECK(rep.records[i].geometry_id == rs[i].geometry_id);
    CHECK(rep.records[i].w == rs[i].w);
    CHECK(rep.records[i].g == rs[i].g);
    CHECK(rep.records[i].d == rs[i].d);
    CHECK(rep.records[i].phi == rs[i].phi);
    CHECK(rep.records[i].q_lp == rs[i].q_lp);
    CHECK(rep.records[i].q_hp == rs[i].q_hp);
  }
}
