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

#include "cpwloss/qdata.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "cpwloss/csvio.hpp"
#include "cpwloss/error.hpp"
#include "cpwloss/stats.hpp"

namespace cpwloss::qdata {

double qtls_correct(double q_lp, double q_hp) {
  if (!(q_lp > 0.0) || !(q_hp > 0.0)) {
    throw config_error("qtls_correct: quality factors must be positive");
  }
  if (std::isinf(q_hp)) return q_lp;
  if (q_hp <= q_lp) {
    throw config_error(
        "qtls_correct: non-physical record, Q_HP <= Q_LP (TLS loss "
        "indistinguishable from zero)");
  }
  return 1.0 / (1.0 / q_lp - 1.0 / q_hp);
}

QtlsStat aggregate(const std::vector<DeviceRecord>& records,
                   const std::string& geometry_id, InvalidRecordPolicy policy) {
  QtlsStat stat;
  stat.geometry_id = geometry_id;
  std::vector<double> qtls;
  int n_total = 0, n_yield = 0;
  for (const DeviceRecord& r : records) {
    if (r.geometry_id != geometry_id) continue;
    ++n_total;
    if (r.q_lp > 1e6) ++n_yield;
    if (!std::isinf(r.q_hp) && r.q_hp <= r.q_lp) {
      if (policy == InvalidRecordPolicy::kClamp) {
        qtls.push_back(10.0 * r.q_lp);
      } else {
        ++stat.n_excluded;
      }
      continue;
    }
    qtls.push_back(qtls_correct(r.q_lp, r.q_hp));
  }
  if (qtls.empty()) {
    throw config_error("aggregate: no valid records for geometry '" +
                       geometry_id + "'");
  }
  const auto ci = stats::mean_confidence(qtls, 0.95);
  stat.n = static_cast<int>(qtls.size());
  stat.mean_qtls = ci.mean;
  stat.ci95_lo = ci.lo;
  stat.ci95_hi = ci.hi;
  stat.yield_above_1e6 = n_total > 0 ? static_cast<double>(n_yield) / n_total : 0.0;
  return stat;
}

namespace {

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  if (s == "inf" || s == "Inf" || s == "INF") {
    *out = std::numeric_limits<double>::infinity();
    return true;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

}  // namespace

ParseReport parse_measurements(std::istream& in) {
  ParseReport report;
  std::string line;
  if (!std::getline(in, line)) {
    throw config_error("measurement CSV: missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMeasurementHeader) {
    throw config_error("measurement CSV: bad header, expected '" +
                       std::string(kMeasurementHeader) + "'");
  }
  int line_no = 1;
  int total_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++total_rows;
    const std::vector<std::string> fields = io::split_csv_line(line);
    auto reject = [&](const std::string& reason) {
      report.rejects.push_back({line_no, reason});
    };
    if (fields.size() != 8) {
      reject("expected 8 fields, got " + std::to_string(fields.size()));
      continue;
    }
    DeviceRecord r;
    r.device_id = fields[0];
    r.geometry_id = fields[1];
    double vals[6];
    bool ok = true;
    for (int i = 0; i < 6; ++i) {
      if (!parse_double(fields[2 + i], &vals[i])) {
        reject("field " + std::to_string(3 + i) + " is not a number: '" +
               fields[2 + i] + "'");
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    r.w = vals[0];
    r.g = vals[1];
    r.d = vals[2];
    r.phi = vals[3];
    r.q_lp = vals[4];
    r.q_hp = vals[5];
    if (r.device_id.empty() || r.geometry_id.empty()) {
      reject("empty device_id or geometry_id");
      continue;
    }
    if (!(r.w > 0.0) || !(r.g > 0.0) || r.d < 0.0) {
      reject("non-positive w/g or negative d");
      continue;
    }
    if (!(r.q_lp > 0.0) || !(r.q_hp > 0.0)) {
      reject("quality factors must be positive");
      continue;
    }
    report.records.push_back(std::move(r));
  }
  if (total_rows > 0 &&
      report.rejects.size() * 2 > static_cast<std::size_t>(total_rows)) {
    throw config_error("measurement CSV: more than half of the rows were "
                       "rejected (" + std::to_string(report.rejects.size()) +
                       "/" + std::to_string(total_rows) +
                       "); likely the wrong file");
  }
  return report;
}

void emit_measurements(std::ostream& os, const std::vector<DeviceRecord>& records) {
  // Full precision so emit -> parse round-trips bit-exactly.
  os << kMeasurementHeader << "\n";
  for (const DeviceRecord& r : records) {
    os << r.device_id << ',' << r.geometry_id << ',' << io::fmt_full(r.w) << ','
       << io::fmt_full(r.g) << ',' << io::fmt_full(r.d) << ','
       << io::fmt_full(r.phi) << ',' << io::fmt_full(r.q_lp) << ','
       << io::fmt_full(r.q_hp) << "\n";
  }
}

}  // namespace cpwloss::qdata
