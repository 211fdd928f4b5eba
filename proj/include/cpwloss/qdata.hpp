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

#ifndef CPWLOSS_QDATA_HPP_
#define CPWLOSS_QDATA_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace cpwloss::qdata {

// One measured resonator. Q values are the already time-averaged low-power
// and high-power internal quality factors.
struct DeviceRecord {
  std::string device_id;
  std::string geometry_id;
  double w = 0.0, g = 0.0, d = 0.0;  // um
  double phi = 90.0;                 // degrees
  double q_lp = 0.0;
  double q_hp = 0.0;
};

// TLS-limited quality factor: 1/Q_TLS = 1/Q_LP - 1/Q_HP. Throws when
// Q_HP <= Q_LP (the TLS loss is indistinguishable from zero).
double qtls_correct(double q_lp, double q_hp);

enum class InvalidRecordPolicy {
  kExclude,  // drop records with q_hp <= q_lp (default)
  kClamp,    // floor them at Q_TLS = 10 * q_lp
};

struct QtlsStat {
  std::string geometry_id;
  int n = 0;  // included records
  double mean_qtls = 0.0;
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
  int n_excluded = 0;
  double yield_above_1e6 = 0.0;  // fraction of records with q_lp > 1e6
};

QtlsStat aggregate(const std::vector<DeviceRecord>& records,
                   const std::string& geometry_id,
                   InvalidRecordPolicy policy = InvalidRecordPolicy::kExclude);

inline constexpr char kMeasurementHeader[] =
    "device_id,geometry_id,w_um,g_um,d_um,phi_deg,q_lp,q_hp";

struct ParseReport {
  std::vector<DeviceRecord> records;
  struct Reject {
    int line = 0;
    std::string reason;
  };
  std::vector<Reject> rejects;
};

// Parses the measurement CSV; malformed rows land in the rejects report.
// Throws on a bad header or when more than half of the rows are rejected.
ParseReport parse_measurements(std::istream& in);

void emit_measurements(std::ostream& os, const std::vector<DeviceRecord>& records);

}  // namespace cpwloss::qdata

#endif  // CPWLOSS_QDATA_HPP_
