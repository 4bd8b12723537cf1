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

#ifndef QOT_STATS_HPP_
#define QOT_STATS_HPP_

#include <span>
#include <vector>

namespace qot {

struct RateFit {
  double slope = 0.0;
  double std_error = 0.0;
  // Set when an input error was <= 0; slope is then -infinity and nothing
  // was fitted.
  bool degenerate = false;
};

/// Ordinary least squares of log(error) on log(n). Needs >= 3 points and
/// positive n; throws DegenerateInput on size mismatch or too few points.
RateFit FitRate(std::span<const double> ns, std::span<const double> errors);

/// sup |F_N - Phi| between the empirical CDF of `sample` and the standard
/// normal CDF. Throws TooFewSamples below 10 values.
double KsDistance(std::span<const double> sample);

double Mean(std::span<const double> xs);
// Unbiased (N - 1) sample variance.
double SampleVariance(std::span<const double> xs);
double Median(std::span<const double> xs);
// Type-7 (linear interpolation) sample quantile.
double Quantile(std::span<const double> xs, double prob);

}  // namespace qot

#endif  // QOT_STATS_HPP_
