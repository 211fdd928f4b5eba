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

#ifndef CPWLOSS_CSVIO_HPP_
#define CPWLOSS_CSVIO_HPP_

#include <string>
#include <vector>

namespace cpwloss::io {

// Splits one RFC-4180 line into fields (handles quoted fields and doubled
// quotes; embedded newlines are not supported).
std::vector<std::string> split_csv_line(const std::string& line);

// Deterministic shortest-roundtrip-ish float formatting for data files.
std::string fmt_g(double v);          // %.12g
std::string fmt_full(double v);       // %.17g, bit-exact round trip
std::string fmt_sig(double v, int n); // %.{n}g

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace cpwloss::io

#endif  // CPWLOSS_CSVIO_HPP_
