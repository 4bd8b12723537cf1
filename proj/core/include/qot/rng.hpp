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

#ifndef QOT_RNG_HPP_
#define QOT_RNG_HPP_

#include <cstdint>
#include <limits>

namespace qot {

// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t Mix64(std::uint64_t x) noexcept;

/// Counter-based 64-bit generator.
///
/// The k-th output of stream (seed, stream) is Mix64(key + (k + 1) * kGamma)
/// where key = Mix64(seed ^ Mix64(stream + kGamma)). Streams with different
/// indices are statistically independent; the output sequence depends only
/// on (seed, stream), so replications can be generated in any order or on any
/// thread and still reproduce bit-for-bit. Satisfies
/// UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() noexcept;
  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t Below(std::uint64_t bound) noexcept;
  // Standard normal via Box-Muller (both variates are used).
  double Normal() noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives a stream index from a tuple of small integers, e.g.
// (sample size, replication, role). Order-sensitive.
std::uint64_t StreamId(std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) noexcept;

}  // namespace qot

#endif  // QOT_RNG_HPP_
