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
#include <string>

#include <gtest/gtest.h>

#include "qot/error.hpp"
#include "qot/experiments.hpp"

namespace qot {
namespace {

ExperimentConfig Small(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.grid = 32;
  c.epsilon = 0.5;
  c.sample_sizes = {20, 40, 80};
  c.replications = 2;
  c.master_seed = 11;
  c.threads = 1;
  if (kind == ExperimentKind::kCouplingClt) {
    c.eta = EtaBox{Point::Zero(1), Point::Constant(1, 0.5), Point::Zero(1), Point::Constant(1, 0.5)};
  }
  return c;
}

ExperimentConfig SingleAtom(ExperimentKind kind) {
  ExperimentConfig c = Small(kind);
  c.population = DomainSpec::Explicit(DiscreteMeasure::Dirac(Point::Constant(1, 0.3)));
  c.population_q = DomainSpec::Explicit(DiscreteMeasure::Dirac(Point::Constant(1, 0.8)));
  c.replications = 3;
  if (c.eta) c.eta = EtaBox{Point::Zero(1), Point::Ones(1), Point::Zero(1), Point::Ones(1)};
  return c;
}

constexpr ExperimentKind kAllKinds[] = {ExperimentKind::kCostClt, ExperimentKind::kPotentialRate,
                                        ExperimentKind::kPotentialsClt, ExperimentKind::kCouplingClt,
                                        ExperimentKind::kConsistency};

TEST(Experiments, SmokeEveryKind) {
  for (ExperimentKind kind : kAllKinds) {
    const ExperimentConfig c = Small(kind);
    const ExperimentReport r = RunExperiment(c);
    EXPECT_EQ(r.kind, kind);
    EXPECT_EQ(r.sizes.size(), 3u) << ExperimentKindName(kind);
    const std::size_t expected_records = kind == ExperimentKind::kConsistency ? 3u : 6u;
    EXPECT_EQ(r.records.size(), expected_records);
    for (const ReplicationRecord& rec : r.records) EXPECT_TRUE(rec.ok);
    EXPECT_TRUE(std::isfinite(r.reference));
    const nlohmann::json j = r.ToJson();
    EXPECT_EQ(j.at("format_version"), 1);
    EXPECT_EQ(j.at("kind"), ExperimentKindName(kind));
    EXPECT_FALSE(j.contains("runtime_seconds"));
    EXPECT_EQ(r.RecordsCsv().rfind("# format_version: 1\n", 0), 0u);
    EXPECT_EQ(r.QqCsv().rfind("# format_version: 1\n", 0), 0u);
    EXPECT_EQ(r.RateCsv().rfind("# format_version: 1\n", 0), 0u);
  }
}

TEST(Experiments, SingleAtomPopulationHasNoError) {
  for (ExperimentKind kind : kAllKinds) {
    const ExperimentReport r = RunExperiment(SingleAtom(kind));
    for (const ReplicationRecord& rec : r.records) {
      EXPECT_TRUE(rec.ok);
      EXPECT_NEAR(rec.stat, 0.0, 1e-9) << ExperimentKindName(kind);
      EXPECT_NEAR(rec.norm_err, 0.0, 1e-9);
    }
    if (kind == ExperimentKind::kCostClt) {
      EXPECT_EQ(r.theoretical_variance, 0.0);
      for (const SizeSummary& s : r.sizes) EXPECT_EQ(s.coverage, 1.0);
    }
  }
}

TEST(Experiments, ConstantEta) {
  ExperimentConfig zero = Small(ExperimentKind::kCouplingClt);
  zero.eta = EtaBox{Point::Constant(1, 2.0), Point::Constant(1, 3.0), Point::Zero(1), Point::Ones(1)};
  const ExperimentReport rz = RunCouplingClt(zero);
  EXPECT_EQ(rz.reference, 0.0);
  EXPECT_EQ(rz.theoretical_variance, 0.0);
  for (const ReplicationRecord& rec : rz.records) {
    EXPECT_EQ(rec.stat, 0.0);
    EXPECT_EQ(rec.norm_err, 0.0);
  }
  ExperimentConfig one = Small(ExperimentKind::kCouplingClt);
  one.eta = EtaBox{Point::Zero(1), Point::Ones(1), Point::Zero(1), Point::Ones(1)};
  const ExperimentReport r1 = RunCouplingClt(one);
  EXPECT_NEAR(r1.reference, 1.0, 1e-8);
  EXPECT_NEAR(r1.theoretical_variance, 0.0, 1e-12);
  for (const ReplicationRecord& rec : r1.records) EXPECT_NEAR(rec.stat, 0.0, 1e-6);
}

TEST(Experiments, BitIdenticalAcrossThreadCounts) {
  for (ExperimentKind kind : {ExperimentKind::kCostClt, ExperimentKind::kCouplingClt}) {
    ExperimentConfig a = Small(kind);
    a.replications = 6;
    ExperimentConfig b = a;
    b.threads = 3;
    const ExperimentReport ra = RunExperiment(a);
    const ExperimentReport rb = RunExperiment(b);
    EXPECT_EQ(ra.ToJson().dump(), rb.ToJson().dump());
    EXPECT_EQ(ra.RecordsCsv(), rb.RecordsCsv());
  }
}

TEST(Experiments, SeedChangesResults) {
  ExperimentConfig a = Small(ExperimentKind::kCostClt);
  ExperimentConfig b = a;
  b.master_seed = 12;
  EXPECT_NE(RunExperiment(a).RecordsCsv(), RunExperiment(b).RecordsCsv());
}

TEST(Experiments, ConsistencyTrajectoryDeterministic) {
  const ExperimentConfig c = Small(ExperimentKind::kConsistency);
  const ExperimentReport a = RunConsistency(c);
  const ExperimentReport b = RunConsistency(c);
  EXPECT_EQ(a.trajectory, b.trajectory);
  EXPECT_EQ(a.trajectory.size(), 3u);
}

TEST(Experiments, AssertionsAreEvaluated) {
  ExperimentConfig c = Small(ExperimentKind::kCostClt);
  c.assertions.coverage = Band{0.0, 1.0};
  c.assertions.ks_max = -1.0;
  c.replications = 10;
  const ExperimentReport r = RunCostClt(c);
  ASSERT_FALSE(r.assertions.empty());
  EXPECT_FALSE(r.AllAssertionsPass());
  int coverage_checks = 0;
  for (const AssertionResult& a : r.assertions) {
    if (a.name.rfind("coverage", 0) == 0) {
      ++coverage_checks;
      EXPECT_TRUE(a.passed);
    }
    if (a.name == "ks_max") EXPECT_FALSE(a.passed);
  }
  EXPECT_EQ(coverage_checks, 3);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c = Small(ExperimentKind::kCouplingClt);
  c.population = DomainSpec::UniformBox(Point::Zero(2), Point::Ones(2));
  c.eta = EtaBox{Point::Zero(2), Point::Constant(2, 0.5), Point::Zero(2), Point::Constant(2, 0.5)};
  c.reference_check_grid = 16;
  c.assertions.variance_ratio = Band{0.8, 1.25};
  c.assertions.slope = Band{-0.65, -0.35};
  c.assertions.monotone_median = true;
  const nlohmann::json j = c.ToJson();
  EXPECT_EQ(ExperimentConfig::FromJson(j).ToJson(), j);
  const ExperimentConfig explicit_pop = SingleAtom(ExperimentKind::kCostClt);
  EXPECT_EQ(ExperimentConfig::FromJson(explicit_pop.ToJson()).ToJson(), explicit_pop.ToJson());
}

TEST(ExperimentConfig, ParsesMinimalJson) {
  const auto j = nlohmann::json::parse(R"({"kind": "cost_clt", "epsilon": 0.25, "sample_sizes": [10, 20]})");
  const ExperimentConfig c = ExperimentConfig::FromJson(j);
  EXPECT_EQ(c.kind, ExperimentKind::kCostClt);
  EXPECT_EQ(c.epsilon, 0.25);
  EXPECT_EQ(c.sample_sizes.size(), 2u);
}

TEST(ExperimentConfig, RejectsInvalid) {
  const char* bad[] = {
      R"({"kind": "cost_clt", "bogus": 1})",
      R"({"kind": "nope"})",
      R"({"kind": "cost_clt", "sample_sizes": [100, 100]})",
      R"({"kind": "cost_clt", "sample_sizes": [200, 100]})",
      R"({"kind": "cost_clt", "replications": 1})",
      R"({"kind": "cost_clt", "epsilon": 0})",
      R"({"kind": "cost_clt", "ci_level": 1.0})",
      R"({"kind": "coupling_clt"})",
      R"({"kind": "cost_clt", "population": {"kind": "uniform_box", "lower": [1], "upper": [0]}})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(
        {
          const ExperimentConfig c = ExperimentConfig::FromJson(nlohmann::json::parse(text));
          c.Validate();
        },
        Error)
        << text;
  }
}

TEST(SolvePopulation, GridReferenceStable) {
  const Population coarse = SolvePopulation(DomainSpec::UnitInterval(), DomainSpec::UnitInterval(), 128, 0.5);
  const Population fine = SolvePopulation(DomainSpec::UnitInterval(), DomainSpec::UnitInterval(), 256, 0.5);
  EXPECT_NEAR(coarse.cost, fine.cost, 1e-4);
  EXPECT_EQ(fine.problem.rows(), 256);
}

}  // namespace
}  // namespace qot
