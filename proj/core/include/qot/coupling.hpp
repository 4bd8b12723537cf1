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

#ifndef QOT_COUPLING_HPP_
#define QOT_COUPLING_HPP_

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "qot/solver.hpp"

namespace qot {

/// The transport plan induced by a pair of potentials, stored as its
/// strictly positive entries sorted by (i, j).
struct SparseCoupling {
  struct Entry {
    Eigen::Index i;
    Eigen::Index j;
    double mass;     // p_i q_j density
    double density;  // (xi_ij)_+ / eps, > 0
  };

  std::vector<Entry> entries;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double total_mass = 0.0;
};

struct SupportStats {
  Eigen::Index nonzero_count = 0;
  double fill_ratio = 0.0;
  double max_density = 0.0;
};

// Row and column sums of the coupling, indexed like P's and Q's atoms.
struct CouplingMarginals {
  Eigen::VectorXd row_mass;
  Eigen::VectorXd col_mass;
};

SparseCoupling PrimalFromDual(const QotProblem& problem, const PotentialPair& pot);

// sum mass * c + (eps / 2) sum p_i q_j density^2.
double PrimalObjective(const QotProblem& problem, const SparseCoupling& coupling);

CouplingMarginals Marginals(const SparseCoupling& coupling);

// Sup-norm distance of the coupling's marginals from P and Q.
double MarginalDefect(const QotProblem& problem, const SparseCoupling& coupling);

/// Primal value of the induced coupling minus the dual value. The coupling
/// must be feasible: a marginal defect above 10 * feasibility_tol raises
/// InfeasibleCoupling. feasibility_tol <= 0 selects DefaultTolerance / eps.
double DualityGap(const QotProblem& problem, const PotentialPair& pot,
                  double feasibility_tol = 0.0);

SupportStats ComputeSupportStats(const SparseCoupling& coupling);

// Header i,j,x1..xd,y1..yd,mass,density after a format_version comment.
void WriteCouplingCsv(std::ostream& out, const QotProblem& problem,
                      const SparseCoupling& coupling);

}  // namespace qot

#endif  // QOT_COUPLING_HPP_
