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

#ifndef CPWLOSS_ERROR_HPP_
#define CPWLOSS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cpwloss {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind {
  kConfig = 2,     // bad inputs, bad geometry parameters, malformed files
  kNumerical = 3,  // solver/mesher failures
  kIo = 4,         // unreadable/unwritable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) {
  return Error(ErrorKind::kConfig, msg);
}
inline Error geometry_error(const std::string& msg) {
  return Error(ErrorKind::kConfig, "geometry: " + msg);
}
inline Error numerical_error(const std::string& msg) {
  return Error(ErrorKind::kNumerical, msg);
}
inline Error io_error(const std::string& msg) {
  return Error(ErrorKind::kIo, msg);
}

}  // namespace cpwloss

#endif  // CPWLOSS_ERROR_HPP_
