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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qot/error.hpp"
#include "qot/limit_law.hpp"
#include "qot/rng.hpp"
#include "qot/stats.hpp"

namespace qot {
namespace {

std::vector<double> PowerLaw(const std::vector<double>& ns, double c, double slope) {
  std::vector<double> out;
  for (double n : ns) out.push_back(c * std::pow(n, slope));
  return out;
}

TEST(FitRate, ExactPowerLaws) {
  const std::vector<double> ns{100, 400, 1600, 6400};
  for (double slope : {-0.5, 0.0, -1.0}) {
    const RateFit fit = FitRate(ns, PowerLaw(ns, 3.0, slope));
    EXPECT_NEAR(fit.slope, slope, 1e-12);
    EXPECT_NEAR(fit.std_error, 0.0, 1e-7);
    EXPECT_FALSE(fit.degenerate);
  }
}

TEST(FitRate, NoisyStandardError) {
  const std::vector<double> ns{100, 200, 400, 800, 1600};
  std::vector<double> errs = PowerLaw(ns, 1.0, -0.5);
  errs[1] *= 1.1;
  errs[3] *= 0.9;
  const RateFit fit = FitRate(ns, errs);
  EXPECT_GT(fit.std_error, 0.0);
  EXPECT_NEAR(fit.slope, -0.5, 0.1);
}

TEST(FitRate, Degenerate) {
  const std::vector<double> ns{100, 400, 1600};
  const RateFit fit = FitRate(ns, std::vector<double>{0.1, 0.0, 0.01});
  EXPECT_TRUE(fit.degenerate);
  EXPECT_TRUE(std::isinf(fit.slope) && fit.slope < 0.0);
  EXPECT_THROW(FitRate(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(FitRate(ns, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(FitRate(std::vector<double>{0, 1, 2}, std::vector<double>{1, 1, 1}), Error);
  EXPECT_THROW(FitRate(std::vector<double>{5, 5, 5}, std::vector<double>{1, 2, 3}), Error);
}

TEST(KsDistance, ExactQuantileSample) {
  const int k = 1000;
  std::vector<double> xs;
  for (int i = 0; i < k; ++i) xs.push_back(NormalQuantile((i + 0.5) / k));
  EXPECT_LE(KsDistance(xs), 0.5 / k + 1e-12);
}

TEST(KsDistance, PointMassAtZero) {
  EXPECT_NEAR(KsDistance(std::vector<double>(50, 0.0)), 0.5, 1e-15);
}

TEST(KsDistance, NormalDrawsAreClose) {
  CounterRng rng(9, 0);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(rng.Normal());
  EXPECT_LT(KsDistance(xs), 1.36 / std::sqrt(20000.0));
  std::vector<double> shifted;
  for (double x : xs) shifted.push_back(x + 0.5);
  EXPECT_GT(KsDistance(shifted), 0.15);
}

TEST(KsDistance, TooFewSamples) {
  try {
    KsDistance(std::vector<double>(9, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewSamples);
  }
}

TEST(Moments, Basic) {
  const std::vector<double> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(Mean(xs), 2.5);
  EXPECT_DOUBLE_EQ(SampleVariance(xs), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(Median(xs), 2.5);
  EXPECT_DOUBLE_EQ(Median(std::vector<double>{3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(Quantile(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(Quantile(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(Quantile(xs, 0.25), 1.75);
  EXPECT_THROW(Mean(std::vector<double>{}), Error);
  EXPECT_THROW(SampleVariance(std::vector<double>{1.0}), Error);
}

}  // namespace
}  // namespace qot
