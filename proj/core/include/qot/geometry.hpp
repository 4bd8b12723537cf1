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

#ifndef QOT_GEOMETRY_HPP_
#define QOT_GEOMETRY_HPP_

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qot/solver.hpp"

namespace qot {

// Bounded test function on the target space, |g| <= 1 expected.
using Probe = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

Probe ConstantProbe(double value = 1.0);

/// Thickened support section S_x(beta) = { y_j : phi(x) + psi(y_j) <=
/// <x, y_j> + beta } for one source atom.
struct SectionReport {
  Eigen::Index x_index = 0;
  double beta = 0.0;
  std::vector<Eigen::Index> member_indices;
  double mass = 0.0;
  // Q-weighted mean of the members; empty when mass == 0.
  Eigen::VectorXd barycenter;
};

SectionReport Section(const QotProblem& problem, const ConvexPotentials& pot,
                      Eigen::Index x_index, double beta);

// min over source atoms of Q(S_x(0)).
double MinSectionMass(const QotProblem& problem, const ConvexPotentials& pot);

// Barycenter of S_x(0); throws EmptySection.
Eigen::VectorXd BarycenterGradient(const QotProblem& problem,
                                   const ConvexPotentials& pot, Eigen::Index x_index);

/// max over x, adjacent beta pairs and probes of
/// |int_{S_x(a)} g dQ - int_{S_x(b)} g dQ| / |a - b|.
double LipschitzBetaDiagnostic(const QotProblem& problem, const ConvexPotentials& pot,
                               const std::vector<double>& beta_grid,
                               const std::vector<Probe>& probes);

struct GradientLipschitz {
  double gradient = 0.0;  // max |grad phi(x) - grad phi(x')| / |x - x'|
  double mass = 0.0;      // max |Q(S_x) - Q(S_x')| / |x - x'|
};

/// Difference quotients over adjacent source atoms, where adjacent means at
/// the minimal nonzero pairwise distance (grid neighbours).
GradientLipschitz GradientLipschitzDiagnostic(const QotProblem& problem,
                                              const ConvexPotentials& pot);

/// sup over source atoms x and thickenings delta of
/// |int_{S_x(delta)} g d(Q - Q_n)|.
///
/// The statistic is piecewise constant in delta, so the sup is taken exactly
/// over the breakpoints contributed by the atoms of Q and Q_n. psi on Q_n's
/// atoms comes from the solved values where an atom coincides with a
/// population atom and from ExtendPotential otherwise.
double VcSupDeviation(const QotProblem& population, const PotentialPair& pot,
                      const DiscreteMeasure& q_n, const Probe& probe);

// All (i, j) with xi_ij >= -beta, in row-major order.
std::vector<std::pair<Eigen::Index, Eigen::Index>> ProductThickening(
    const QotProblem& problem, const PotentialPair& pot, double beta);

struct DiagnosticRow {
  std::string diagnostic;
  std::string param;
  double value;
};
// diagnostic,param,value rows after a format_version comment.
void WriteDiagnosticsCsv(std::ostream& out, const std::vector<DiagnosticRow>& rows);

}  // namespace qot

#endif  // QOT_GEOMETRY_HPP_
