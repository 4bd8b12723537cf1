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

#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qot/error.hpp"
#include "qot/geometry.hpp"
#include "qot/rng.hpp"
#include "qot/solver.hpp"

namespace qot {
namespace {

QotProblem TwoByTwo(double eps) {
  const DiscreteMeasure m = DiscreteMeasure::OnLine({0.0, 1.0}, {0.5, 0.5});
  return QotProblem(m, m, eps);
}

ConvexPotentials Convex(const QotProblem& problem, const PotentialPair& pot) {
  return ToConvexForm(pot, problem.p().points(), problem.q().points());
}

ConvexPotentials Solved(const QotProblem& problem) {
  return Convex(problem, SolveAlternating(problem).potentials);
}

QotProblem GridProblem(int m, double eps) {
  const DiscreteMeasure grid = QuadratureGrid(DomainSpec::UnitInterval(), m);
  return QotProblem(grid, grid, eps);
}

double RelativeChange(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

TEST(Section, TwoByTwoExamples) {
  const QotProblem problem = TwoByTwo(0.1);
  const ConvexPotentials pot = Solved(problem);
  const SectionReport s0 = Section(problem, pot, 0, 0.0);
  ASSERT_EQ(s0.member_indices, std::vector<Eigen::Index>{0});
  EXPECT_DOUBLE_EQ(s0.mass, 0.5);
  const SectionReport s3 = Section(problem, pot, 0, 0.3 + 1e-12);
  EXPECT_EQ(s3.member_indices.size(), 2u);
  EXPECT_DOUBLE_EQ(s3.mass, 1.0);
  const double max_abs = XiMatrix(problem, SolveAlternating(problem).potentials).cwiseAbs().maxCoeff();
  const SectionReport empty = Section(problem, pot, 0, -10.0 * max_abs);
  EXPECT_TRUE(empty.member_indices.empty());
  EXPECT_EQ(empty.mass, 0.0);
  EXPECT_EQ(empty.barycenter.size(), 0);
}

TEST(Section, NestingInBeta) {
  const QotProblem problem = oracle::RandomProblem(15, 20, 2, 0.05, 31);
  const ConvexPotentials pot = Solved(problem);
  const std::vector<double> betas{-0.2, -0.05, 0.0, 0.01, 0.05, 0.3};
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    for (std::size_t b = 0; b + 1 < betas.size(); ++b) {
      const auto small = Section(problem, pot, i, betas[b]).member_indices;
      const auto large = Section(problem, pot, i, betas[b + 1]).member_indices;
      EXPECT_TRUE(std::includes(large.begin(), large.end(), small.begin(), small.end()));
    }
  }
}

TEST(Section, RowMassIdentity) {
  const QotProblem problem = oracle::RandomProblem(12, 14, 2, 0.1, 32);
  const PotentialPair pot = SolveAlternating(problem).potentials;
  const ConvexPotentials convex = Convex(problem, pot);
  const Eigen::MatrixXd xi = XiMatrix(problem, pot);
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j : Section(problem, convex, i, 0.0).member_indices) s += problem.q_weights()[j] * xi(i, j);
    EXPECT_NEAR(s, problem.epsilon(), DefaultTolerance(problem));
  }
}

TEST(MinSectionMass, Examples) {
  const QotProblem two = TwoByTwo(0.1);
  EXPECT_DOUBLE_EQ(MinSectionMass(two, Solved(two)), 0.5);
  const QotProblem one(DiscreteMeasure::OnLine({0.0}, {1.0}), DiscreteMeasure::OnLine({1.0}, {1.0}), 1.0);
  EXPECT_DOUBLE_EQ(MinSectionMass(one, Solved(one)), 1.0);
  const QotProblem far(DiscreteMeasure::OnLine({0.0, 1.0}, {0.5, 0.5}), DiscreteMeasure::OnLine({2.0, 3.0}, {0.5, 0.5}), 1.0);
  EXPECT_EQ(MinSectionMass(far, Convex(far, {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)})), 0.0);
}

TEST(BarycenterGradient, Examples) {
  const QotProblem one(DiscreteMeasure::OnLine({0.0}, {1.0}), DiscreteMeasure::OnLine({0.7}, {1.0}), 1.0);
  EXPECT_DOUBLE_EQ(BarycenterGradient(one, Solved(one), 0)(0), 0.7);
  const QotProblem two = TwoByTwo(0.1);
  EXPECT_DOUBLE_EQ(BarycenterGradient(two, Solved(two), 0)(0), 0.0);
  const QotProblem sym(DiscreteMeasure::OnLine({0.0}, {1.0}), DiscreteMeasure::OnLine({-1.0, 1.0}, {0.5, 0.5}), 5.0);
  EXPECT_NEAR(BarycenterGradient(sym, Solved(sym), 0)(0), 0.0, 1e-15);
}

TEST(BarycenterGradient, EmptySectionThrows) {
  const QotProblem far(DiscreteMeasure::OnLine({0.0}, {1.0}), DiscreteMeasure::OnLine({2.0}, {1.0}), 1.0);
  try {
    BarycenterGradient(far, Convex(far, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySection);
  }
}

TEST(BarycenterGradient, InConvexHull) {
  const QotProblem problem = oracle::RandomProblem(10, 10, 1, 0.05, 33);
  const ConvexPotentials pot = Solved(problem);
  const double lo = problem.q().points().minCoeff();
  const double hi = problem.q().points().maxCoeff();
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    const double b = BarycenterGradient(problem, pot, i)(0);
    EXPECT_GE(b, lo);
    EXPECT_LE(b, hi);
  }
}

TEST(LipschitzBetaDiagnostic, DegenerateInputs) {
  const QotProblem two = TwoByTwo(0.1);
  const ConvexPotentials pot = Solved(two);
  EXPECT_EQ(LipschitzBetaDiagnostic(two, pot, {0.1, 0.1}, {ConstantProbe()}), 0.0);
  const QotProblem one(DiscreteMeasure::OnLine({0.0}, {1.0}), DiscreteMeasure::OnLine({0.0}, {1.0}), 1.0);
  EXPECT_EQ(LipschitzBetaDiagnostic(one, Solved(one), {-0.1, 0.0, 0.1}, {ConstantProbe()}), 0.0);
}

TEST(LipschitzBetaDiagnostic, GridRefinementStability) {
  const std::vector<double> betas{-0.04, -0.02, 0.0, 0.02, 0.04};
  const std::vector<Probe> probes{ConstantProbe(), [](const Eigen::Ref<const Eigen::RowVectorXd>& y) {
                                    return y(0) < 0.5 ? 1.0 : -1.0;
                                  }};
  const QotProblem coarse = GridProblem(256, 0.05);
  const QotProblem fine = GridProblem(512, 0.05);
  const double a = LipschitzBetaDiagnostic(coarse, Solved(coarse), betas, probes);
  const double b = LipschitzBetaDiagnostic(fine, Solved(fine), betas, probes);
  EXPECT_GT(a, 0.0);
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_LE(RelativeChange(a, b), 0.25) << a << " vs " << b;
}

TEST(GradientLipschitzDiagnostic, SingleAtomIsZero) {
  const QotProblem one(DiscreteMeasure::OnLine({0.0, 0.5}, {0.5, 0.5}), DiscreteMeasure::OnLine({0.2}, {1.0}), 1.0);
  const GradientLipschitz g = GradientLipschitzDiagnostic(one, Solved(one));
  EXPECT_EQ(g.gradient, 0.0);
  EXPECT_EQ(g.mass, 0.0);
}

TEST(GradientLipschitzDiagnostic, GridRefinementStability) {
  for (double eps : {0.5, 0.05}) {
    const QotProblem coarse = GridProblem(256, eps);
    const QotProblem fine = GridProblem(512, eps);
    const GradientLipschitz a = GradientLipschitzDiagnostic(coarse, Solved(coarse));
    const GradientLipschitz b = GradientLipschitzDiagnostic(fine, Solved(fine));
    EXPECT_TRUE(std::isfinite(a.gradient));
    EXPECT_LE(RelativeChange(a.gradient, b.gradient), 0.25) << eps << ": " << a.gradient << " vs " << b.gradient;
  }
}

TEST(GradientLipschitzDiagnostic, TranslationInvariant) {
  const QotProblem base = GridProblem(64, 0.05);
  const Point shift = Point::Constant(1, 2.5);
  const QotProblem moved(base.p().Translated(shift), base.q().Translated(shift), 0.05);
  const GradientLipschitz a = GradientLipschitzDiagnostic(base, Solved(base));
  const GradientLipschitz b = GradientLipschitzDiagnostic(moved, Solved(moved));
  EXPECT_NEAR(a.gradient, b.gradient, 1e-6 * std::max(1.0, a.gradient));
  EXPECT_NEAR(a.mass, b.mass, 1e-6 * std::max(1.0, a.mass));
}

TEST(VcSupDeviation, TrivialCases) {
  const QotProblem pop = GridProblem(32, 0.5);
  const PotentialPair pot = SolveAlternating(pop).potentials;
  EXPECT_NEAR(VcSupDeviation(pop, pot, pop.q(), ConstantProbe()), 0.0, 1e-15);
  const DiscreteMeasure qn = SampleEmpirical(DomainSpec::UnitInterval(), 50, 3);
  EXPECT_EQ(VcSupDeviation(pop, pot, qn, ConstantProbe(0.0)), 0.0);
  EXPECT_GT(VcSupDeviation(pop, pot, qn, ConstantProbe()), 0.0);
}

TEST(VcSupDeviation, GaugeInvariant) {
  const QotProblem pop = GridProblem(32, 0.1);
  const PotentialPair pot = SolveAlternating(pop).potentials;
  const PotentialPair shifted{pot.f.array() + 0.37, pot.g.array() - 0.37};
  const DiscreteMeasure qn = SampleEmpirical(DomainSpec::UnitInterval(), 40, 4);
  EXPECT_NEAR(VcSupDeviation(pop, pot, qn, ConstantProbe()), VcSupDeviation(pop, shifted, qn, ConstantProbe()),
              1e-12);
}

// Brute force over a dense delta grid never exceeds the breakpoint sup.
TEST(VcSupDeviation, DominatesDeltaGrid) {
  const QotProblem pop = GridProblem(16, 0.1);
  const PotentialPair pot = SolveAlternating(pop).potentials;
  const DiscreteMeasure qn = SampleEmpirical(pop.q(), 30, 5);
  const double exact = VcSupDeviation(pop, pot, qn, ConstantProbe());
  double grid_best = 0.0;
  for (Eigen::Index i = 0; i < pop.rows(); ++i) {
    for (int k = 0; k <= 2000; ++k) {
      const double delta = -0.6 + 1.2 * k / 2000.0;
      double s = 0.0;
      for (Eigen::Index j = 0; j < pop.cols(); ++j) {
        if (Xi(pop, pot, i, j) >= -delta) s += pop.q().weight(j);
      }
      for (Eigen::Index r = 0; r < qn.size(); ++r) {
        const double xi = pot.f[i] + ExtendPotential(qn.point(r), pop.p(), pot.f, pop.epsilon()) -
                          EvalCost(pop.p().point(i), qn.point(r));
        if (xi >= -delta) s -= qn.weight(r);
      }
      grid_best = std::max(grid_best, std::abs(s));
    }
  }
  EXPECT_GE(exact + 1e-9, grid_best);
  EXPECT_GT(grid_best, 0.0);
}

TEST(ProductThickening, Examples) {
  const QotProblem two = TwoByTwo(0.1);
  const PotentialPair pot = SolveAlternating(two).potentials;
  const auto support = ProductThickening(two, pot, 0.0);
  ASSERT_EQ(support.size(), 2u);
  EXPECT_EQ(support[0], std::make_pair(Eigen::Index{0}, Eigen::Index{0}));
  EXPECT_EQ(support[1], std::make_pair(Eigen::Index{1}, Eigen::Index{1}));
  EXPECT_EQ(ProductThickening(two, pot, 100.0).size(), 4u);
}

TEST(ProductThickening, Nesting) {
  const QotProblem problem = oracle::RandomProblem(10, 11, 2, 0.05, 34);
  const PotentialPair pot = SolveAlternating(problem).potentials;
  auto previous = ProductThickening(problem, pot, -0.1);
  for (double beta : {-0.05, 0.0, 0.02, 0.1, 1.0}) {
    const auto next = ProductThickening(problem, pot, beta);
    EXPECT_TRUE(std::includes(next.begin(), next.end(), previous.begin(), previous.end()));
    previous = next;
  }
}

TEST(DiagnosticsCsv, Format) {
  std::ostringstream out;
  WriteDiagnosticsCsv(out, {{"min_section_mass", "", 0.5}, {"lipschitz_beta", "betas=0;0.1", 1.25}});
  EXPECT_EQ(out.str(), "# format_version: 1\ndiagnostic,param,value\nmin_section_mass,,0.5\nlipschitz_beta,betas=0;0.1,1.25\n");
}

}  // namespace
}  // namespace qot
