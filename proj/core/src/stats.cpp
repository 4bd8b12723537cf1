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

#include "qot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qot/error.hpp"
#include "qot/limit_law.hpp"

namespace qot {

RateFit FitRate(std::span<const double> ns, std::span<const double> errors) {
  if (ns.size() != errors.size()) {
    throw Error(ErrorCode::kDegenerateInput, "sizes and errors differ in length");
  }
  if (ns.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput, "rate fit needs at least three points");
  }
  for (double n : ns) {
    if (!(n > 0.0)) throw Error(ErrorCode::kDegenerateInput, "sample sizes must be positive");
  }
  for (double e : errors) {
    if (!(e > 0.0)) {
      return {-std::numeric_limits<double>::infinity(), 0.0, true};
    }
  }
  const std::size_t k = ns.size();
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(errors[i]);
  }
  const double mx = Mean(lx);
  const double my = Mean(ly);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::kDegenerateInput, "sample sizes are all equal");
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double res = ly[i] - my - slope * (lx[i] - mx);
    sse += res * res;
  }
  const double se = std::sqrt(sse / static_cast<double>(k - 2) / sxx);
  return {slope, se, false};
}

double KsDistance(std::span<const double> sample) {
  if (sample.size() < 10) {
    throw Error(ErrorCode::kTooFewSamples, "KS distance needs at least 10 values");
  }
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = NormalCdf(xs[i]);
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - cdf,
                             cdf - static_cast<double>(i) / n));
  }
  return d;
}

double Mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::kTooFewSamples, "mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double SampleVariance(std::span<const double> xs) {
  if (xs.size() < 2) throw Error(ErrorCode::kTooFewSamples, "variance needs two values");
  const double m = Mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double Quantile(std::span<const double> xs, double prob) {
  if (xs.empty()) throw Error(ErrorCode::kTooFewSamples, "quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile probability outside [0, 1]");
  }
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double h = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double Median(std::span<const double> xs) { return Quantile(xs, 0.5); }

}  // namespace qot
