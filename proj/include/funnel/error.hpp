// Copyright 2026 The Funnel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace funnel {

enum class ErrorKind {
  kInputDomain,
  kFormat,
  kValidation,
  kState,
  kAuth,
  kProtocol,
  kStream,
  kGone,
  kNotFound,
  kHarness,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInputDomain:
      return "input_domain";
    case ErrorKind::kFormat:
      return "format";
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kState:
      return "state";
    case ErrorKind::kAuth:
      return "auth";
    case ErrorKind::kProtocol:
      return "protocol";
    case ErrorKind::kStream:
      return "stream";
    case ErrorKind::kGone:
      return "gone";
    case ErrorKind::kNotFound:
      return "not_found";
    case ErrorKind::kHarness:
      return "harness";
  }
  return "unknown";
}

// Every library failure is one of these. `field` names the offending input
// (a JSON key, object id or path) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string message, std::string field = {}) {
  throw Error(kind, std::move(message), std::move(field));
}

}  // namespace funnel
