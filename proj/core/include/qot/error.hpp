// Copyright 2026 The qotstat Authors.
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

#ifndef QOT_ERROR_HPP_
#define QOT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace qot {

enum class ErrorCode {
  kNegativeWeight,
  kWeightSumMismatch,
  kDimensionMismatch,
  kTooLarge,
  kInvalidArgument,
  kIndexOutOfRange,
  kNonpositiveEpsilon,
  kNotConverged,
  kNoConsistentActiveSet,
  kInfeasibleCoupling,
  kEmptySection,
  kSingularOnQuotient,
  kInvalidLevel,
  kEmptySupport,
  kFactorizationFailure,
  kDegenerateInput,
  kTooFewSamples,
  kParseError,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Base exception for every failure raised by the library. The code is the
// stable, machine-readable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qot

#endif  // QOT_ERROR_HPP_
