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

#include "qot/experiments.hpp"

namespace qot {
namespace {

DomainSpec SixteenAtomGrid() {
  std::vector<double> xs, ws;
  for (int i = 0; i < 16; ++i) {
    xs.push_back((i + 0.5) / 16.0);
    ws.push_back(1.0 / 16.0);
  }
  return DomainSpec::Explicit(DiscreteMeasure::OnLine(xs, ws));
}

ExperimentConfig Headline(ExperimentKind kind, double eps) {
  ExperimentConfig c;
  c.kind = kind;
  c.population = SixteenAtomGrid();
  c.grid = 16;
  c.epsilon = eps;
  c.sample_sizes = {1600};
  c.replications = 2000;
  c.master_seed = 5;
  return c;
}

TEST(MonteCarlo, PotentialsLimitVariance) {
  for (double eps : {0.1, 0.05}) {
    for (IndexPair pair : {IndexPair{0, 0}, IndexPair{3, 5}}) {
      ExperimentConfig c = Headline(ExperimentKind::kPotentialsClt, eps);
      c.eval_pair = pair;
      const ExperimentReport r = RunPotentialsClt(c);
      const SizeSummary& s = r.sizes.back();
      EXPECT_EQ(s.failed, 0);
      EXPECT_LE(std::abs(s.variance_ratio - 1.0), 0.15)
          << "eps " << eps << " pair (" << pair.first << "," << pair.second << "): empirical "
          << s.empirical_variance << " vs " << r.theoretical_variance;
    }
  }
}

TEST(MonteCarlo, CouplingFunctionalVariance) {
  for (double eps : {0.1, 0.05}) {
    ExperimentConfig c = Headline(ExperimentKind::kCouplingClt, eps);
    c.eta = EtaBox{Point::Zero(1), Point::Constant(1, 0.5), Point::Zero(1), Point::Constant(1, 0.5)};
    const ExperimentReport r = RunCouplingClt(c);
    const SizeSummary& s = r.sizes.back();
    EXPECT_EQ(s.failed, 0);
    EXPECT_LE(std::abs(s.variance_ratio - 1.0), 0.20)
        << "eps " << eps << ": empirical " << s.empirical_variance << " vs " << r.theoretical_variance;
  }
}

TEST(MonteCarlo, SingleAtomPotentialsHaveNoFluctuation) {
  ExperimentConfig c = Headline(ExperimentKind::kPotentialsClt, 1.0);
  c.population = DomainSpec::Explicit(DiscreteMeasure::Dirac(Point::Constant(1, 0.2)));
  c.population_q = DomainSpec::Explicit(DiscreteMeasure::Dirac(Point::Constant(1, 0.9)));
  c.sample_sizes = {100, 1000};
  c.replications = 50;
  const ExperimentReport r = RunPotentialsClt(c);
  EXPECT_EQ(r.theoretical_variance, 0.0);
  for (const SizeSummary& s : r.sizes) EXPECT_LE(s.empirical_variance, 1e-20);
}

}  // namespace
}  // namespace qot
