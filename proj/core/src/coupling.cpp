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

#include "qot/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qot/io.hpp"

namespace qot {

SparseCoupling PrimalFromDual(const QotProblem& problem, const PotentialPair& pot) {
  const Eigen::MatrixXd xi = XiMatrix(problem, pot);
  const double eps = problem.epsilon();
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  SparseCoupling out;
  out.rows = problem.rows();
  out.cols = problem.cols();
  for (Eigen::Index i = 0; i < out.rows; ++i) {
    for (Eigen::Index j = 0; j < out.cols; ++j) {
      if (xi(i, j) > 0.0) {
        const double density = xi(i, j) / eps;
        const double mass = p[i] * q[j] * density;
        out.entries.push_back({i, j, mass, density});
        out.total_mass += mass;
      }
    }
  }
  return out;
}

double PrimalObjective(const QotProblem& problem, const SparseCoupling& coupling) {
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  double transport = 0.0;
  double penalty = 0.0;
  for (const auto& e : coupling.entries) {
    transport += e.mass * problem.cost()(e.i, e.j);
    penalty += p[e.i] * q[e.j] * e.density * e.density;
  }
  return transport + 0.5 * problem.epsilon() * penalty;
}

CouplingMarginals Marginals(const SparseCoupling& coupling) {
  CouplingMarginals out{Eigen::VectorXd::Zero(coupling.rows),
                        Eigen::VectorXd::Zero(coupling.cols)};
  for (const auto& e : coupling.entries) {
    out.row_mass[e.i] += e.mass;
    out.col_mass[e.j] += e.mass;
  }
  return out;
}

double MarginalDefect(const QotProblem& problem, const SparseCoupling& coupling) {
  const CouplingMarginals mg = Marginals(coupling);
  return std::max((mg.row_mass - problem.p_weights()).cwiseAbs().maxCoeff(),
                  (mg.col_mass - problem.q_weights()).cwiseAbs().maxCoeff());
}

double DualityGap(const QotProblem& problem, const PotentialPair& pot,
                  double feasibility_tol) {
  const double tol =
      feasibility_tol > 0.0 ? feasibility_tol : DefaultTolerance(problem) / problem.epsilon();
  const SparseCoupling coupling = PrimalFromDual(problem, pot);
  const double defect = MarginalDefect(problem, coupling);
  if (defect > 10.0 * tol) {
    throw Error(ErrorCode::kInfeasibleCoupling,
                "marginal defect " + FormatDouble(defect) + " exceeds " +
                    FormatDouble(10.0 * tol));
  }
  return PrimalObjective(problem, coupling) - DualObjective(problem, pot);
}

SupportStats ComputeSupportStats(const SparseCoupling& coupling) {
  SupportStats s;
  s.nonzero_count = static_cast<Eigen::Index>(coupling.entries.size());
  const double cells = static_cast<double>(coupling.rows) * static_cast<double>(coupling.cols);
  s.fill_ratio = cells > 0 ? static_cast<double>(s.nonzero_count) / cells : 0.0;
  for (const auto& e : coupling.entries) s.max_density = std::max(s.max_density, e.density);
  return s;
}

void WriteCouplingCsv(std::ostream& out, const QotProblem& problem,
                      const SparseCoupling& coupling) {
  const int d = problem.p().dim();
  out << "# format_version: " << kFormatVersion << '\n' << "i,j";
  for (int k = 0; k < d; ++k) out << ",x" << (k + 1);
  for (int k = 0; k < d; ++k) out << ",y" << (k + 1);
  out << ",mass,density\n";
  for (const auto& e : coupling.entries) {
    out << e.i << ',' << e.j;
    for (int k = 0; k < d; ++k) out << ',' << FormatDouble(problem.p().points()(e.i, k));
    for (int k = 0; k < d; ++k) out << ',' << FormatDouble(problem.q().points()(e.j, k));
    out << ',' << FormatDouble(e.mass) << ',' << FormatDouble(e.density) << '\n';
  }
}

}  // namespace qot
