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

#ifndef CPWLOSS_CONFIG_HPP_
#define CPWLOSS_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

namespace cpwloss::io {

// Flat `key = value` configuration with arrays. Lines starting with '#' are
// comments; array values are whitespace- or comma-separated numbers. Length
// keys carry their unit in the name (`w_um`, `layer_t_nm`).
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double dflt) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long dflt) const;
  std::vector<double> get_array(const std::string& key) const;

  // Canonical serialization used for content hashing.
  std::string canonical() const;

  void set(const std::string& key, const std::string& value);

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cpwloss::io

#endif  // CPWLOSS_CONFIG_HPP_
