// Copyright 2026 The PulseGuard Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PULSEGUARD_ERROR_HPP_
#define PULSEGUARD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pulseguard {

// Error categories shared by the core library and the C API. The numeric
// values are mirrored by pg_status in pulseguard.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kData = 4,
  kModelFormat = 5,
  kModelVersion = 6,
  kModelDimension = 7,
  kRecordFormat = 8,
  kInsufficientData = 9,
  kNoEligible = 10,
  kNonFinite = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::kInvalidArgument) {
  if (!cond) throw Error(code, what);
}

}  // namespace pulseguard

#endif  // PULSEGUARD_ERROR_HPP_
