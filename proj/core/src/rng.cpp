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

#include "qot/rng.hpp"

#include <cmath>
#include <numbers>

#include "qot/error.hpp"

namespace qot {

std::uint64_t Mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(Mix64(seed ^ Mix64(stream + kGamma))) {}

CounterRng::result_type CounterRng::operator()() noexcept {
  ++counter_;
  return Mix64(key_ + counter_ * kGamma);
}

double CounterRng::Uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::Below(std::uint64_t bound) noexcept {
  const std::uint64_t limit = max() - max() % bound;
  for (;;) {
    const std::uint64_t r = (*this)();
    if (r < limit) return r % bound;
  }
}

double CounterRng::Normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t StreamId(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return Mix64(Mix64(Mix64(a) ^ (b + CounterRng::kGamma)) ^ (c + 2 * CounterRng::kGamma));
}

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kWeightSumMismatch: return "WeightSumMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNonpositiveEpsilon: return "NonpositiveEpsilon";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kNoConsistentActiveSet: return "NoConsistentActiveSet";
    case ErrorCode::kInfeasibleCoupling: return "InfeasibleCoupling";
    case ErrorCode::kEmptySection: return "EmptySection";
    case ErrorCode::kSingularOnQuotient: return "SingularOnQuotient";
    case ErrorCode::kInvalidLevel: return "InvalidLevel";
    case ErrorCode::kEmptySupport: return "EmptySupport";
    case ErrorCode::kFactorizationFailure: return "FactorizationFailure";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qot
