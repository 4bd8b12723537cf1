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

#include "qot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace qot {

namespace {

void CheckShapes(const QotProblem& problem, const PotentialPair& pot) {
  if (pot.f.size() != problem.rows() || pot.g.size() != problem.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "potentials do not match the problem");
  }
}

PotentialPair ZeroPotentials(const QotProblem& problem) {
  return {Eigen::VectorXd::Zero(problem.rows()), Eigen::VectorXd::Zero(problem.cols()),
          Gauge::kMeanBalanced};
}

}  // namespace

QotProblem::QotProblem(const DiscreteMeasure& p, const DiscreteMeasure& q,
                       double epsilon, CostKind /*cost_kind*/) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kNonpositiveEpsilon, "epsilon must be positive");
  }
  if (p.dim() != q.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "P and Q live in different dimensions");
  }
  DiscreteMeasure pp = p.WithoutZeroWeights();
  DiscreteMeasure qq = q.WithoutZeroWeights();
  Eigen::MatrixXd cost(pp.size(), qq.size());
  for (Eigen::Index j = 0; j < qq.size(); ++j) {
    for (Eigen::Index i = 0; i < pp.size(); ++i) {
      cost(i, j) = EvalCost(pp.point(i), qq.point(j));
    }
  }
  Eigen::MatrixXd cost_t = cost.transpose();
  data_ = std::make_shared<const Data>(
      Data{std::move(pp), std::move(qq), epsilon, std::move(cost), std::move(cost_t)});
}

QotProblem QotProblem::Swapped() const { return QotProblem(q(), p(), epsilon()); }

NotConverged::NotConverged(PotentialPair best, SolveReport report)
    : Error(ErrorCode::kNotConverged,
            "residual " + std::to_string(report.final_residual) + " after " +
                std::to_string(report.iterations) + " iterations"),
      best_(std::move(best)),
      report_(std::move(report)) {}

double DefaultTolerance(const QotProblem& problem) { return 1e-9 * problem.epsilon(); }

double Xi(const QotProblem& problem, const PotentialPair& pot, Eigen::Index i,
          Eigen::Index j) {
  CheckShapes(problem, pot);
  if (i < 0 || i >= problem.rows() || j < 0 || j >= problem.cols()) {
    throw Error(ErrorCode::kIndexOutOfRange, "atom index out of range");
  }
  return pot.f[i] + pot.g[j] - problem.cost()(i, j);
}

Eigen::MatrixXd XiMatrix(const QotProblem& problem, const PotentialPair& pot) {
  CheckShapes(problem, pot);
  Eigen::MatrixXd xi = -problem.cost();
  xi.colwise() += pot.f;
  xi.rowwise() += pot.g.transpose();
  return xi;
}

Eigen::MatrixXd HingeMatrix(const QotProblem& problem, const PotentialPair& pot) {
  return XiMatrix(problem, pot).cwiseMax(0.0);
}

double DualObjective(const QotProblem& problem, const PotentialPair& pot) {
  const Eigen::MatrixXd h = HingeMatrix(problem, pot);
  const double quad =
      problem.p_weights().dot(h.cwiseAbs2() * problem.q_weights());
  return problem.p_weights().dot(pot.f) + problem.q_weights().dot(pot.g) -
         quad / (2.0 * problem.epsilon());
}

double Residuals::SupNorm() const {
  double s = 0.0;
  if (row.size() > 0) s = std::max(s, row.cwiseAbs().maxCoeff());
  if (col.size() > 0) s = std::max(s, col.cwiseAbs().maxCoeff());
  return s;
}

Residuals MarginalResiduals(const QotProblem& problem, const PotentialPair& pot) {
  const Eigen::MatrixXd h = HingeMatrix(problem, pot);
  const double eps = problem.epsilon();
  Residuals r;
  r.row = Eigen::VectorXd::Constant(problem.rows(), eps) - h * problem.q_weights();
  r.col = Eigen::VectorXd::Constant(problem.cols(), eps) -
          h.transpose() * problem.p_weights();
  return r;
}

PotentialPair DualGradient(const QotProblem& problem, const PotentialPair& pot) {
  const Residuals r = MarginalResiduals(problem, pot);
  const double inv_eps = 1.0 / problem.epsilon();
  return {problem.p_weights().cwiseProduct(r.row) * inv_eps,
          problem.q_weights().cwiseProduct(r.col) * inv_eps, pot.gauge};
}

double CoordinateUpdateRow(const Eigen::Ref<const Eigen::VectorXd>& g,
                           const Eigen::Ref<const Eigen::VectorXd>& q,
                           const Eigen::Ref<const Eigen::VectorXd>& c_row,
                           double epsilon) {
  if (!(epsilon > 0.0)) {
    throw Error(ErrorCode::kNonpositiveEpsilon, "epsilon must be positive");
  }
  const Eigen::Index m = g.size();
  if (q.size() != m || c_row.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "row update inputs differ in length");
  }
  double total = 0.0;
  double weighted = 0.0;
  double a_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (q[j] <= 0.0) continue;
    const double a = c_row[j] - g[j];
    total += q[j];
    weighted += q[j] * a;
    a_max = std::max(a_max, a);
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "row update needs positive total weight");
  }
  const double t_all = (epsilon + weighted) / total;
  if (t_all >= a_max) return t_all;

  thread_local std::vector<std::pair<double, double>> thresholds;
  thresholds.clear();
  for (Eigen::Index j = 0; j < m; ++j) {
    if (q[j] > 0.0) thresholds.emplace_back(c_row[j] - g[j], q[j]);
  }
  std::sort(thresholds.begin(), thresholds.end());
  double cum_q = 0.0;
  double cum_qa = 0.0;
  const std::size_t count = thresholds.size();
  for (std::size_t k = 0; k < count; ++k) {
    cum_q += thresholds[k].second;
    cum_qa += thresholds[k].second * thresholds[k].first;
    const double t = (epsilon + cum_qa) / cum_q;
    if (k + 1 == count || t <= thresholds[k + 1].first) return t;
  }
  return t_all;  // unreachable: the last piece always accepts
}

SolveResult SolveAlternating(const QotProblem& problem, const AlternatingOptions& options,
                             const std::optional<PotentialPair>& start) {
  const double tol = options.tol > 0.0 ? options.tol : DefaultTolerance(problem);
  const double eps = problem.epsilon();
  PotentialPair pot = start ? *start : ZeroPotentials(problem);
  CheckShapes(problem, pot);
  const Eigen::MatrixXd& cost = problem.cost();
  const Eigen::MatrixXd& cost_t = problem.cost_transposed();
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();

  SolveReport report;
  if (options.record_trace) report.dual_values.push_back(DualObjective(problem, pot));
  report.final_residual = MarginalResiduals(problem, pot).SupNorm();
  while (report.final_residual > tol) {
    if (report.iterations >= options.max_sweeps) {
      throw NotConverged(GaugeFix(pot, p, q), std::move(report));
    }
    for (Eigen::Index i = 0; i < problem.rows(); ++i) {
      pot.f[i] = CoordinateUpdateRow(pot.g, q, cost_t.col(i), eps);
    }
    for (Eigen::Index j = 0; j < problem.cols(); ++j) {
      pot.g[j] = CoordinateUpdateRow(pot.f, p, cost.col(j), eps);
    }
    ++report.iterations;
    // Keep the representative centred; exact gauge moves do not change xi.
    pot = GaugeFix(pot, p, q);
    if (options.record_trace) report.dual_values.push_back(DualObjective(problem, pot));
    report.final_residual = MarginalResiduals(problem, pot).SupNorm();
  }
  report.converged = true;
  return {GaugeFix(pot, p, q), std::move(report)};
}

SolveResult SolveGradient(const QotProblem& problem, const GradientOptions& options,
                          const std::optional<PotentialPair>& start) {
  const double tol = options.tol > 0.0 ? options.tol : DefaultTolerance(problem);
  const double step = options.step > 0.0 ? options.step : 0.5 * problem.epsilon();
  const double tau = step / problem.epsilon();
  PotentialPair pot = start ? *start : ZeroPotentials(problem);
  CheckShapes(problem, pot);

  SolveReport report;
  if (options.record_trace) report.dual_values.push_back(DualObjective(problem, pot));
  Residuals r = MarginalResiduals(problem, pot);
  report.final_residual = r.SupNorm();
  while (report.final_residual > tol) {
    if (report.iterations >= options.max_iter) {
      throw NotConverged(GaugeFix(pot, problem), std::move(report));
    }
    pot.f += tau * r.row;
    pot.g += tau * r.col;
    ++report.iterations;
    if (options.record_trace) report.dual_values.push_back(DualObjective(problem, pot));
    r = MarginalResiduals(problem, pot);
    report.final_residual = r.SupNorm();
  }
  report.converged = true;
  return {GaugeFix(pot, problem), std::move(report)};
}

PotentialPair GaugeFix(const PotentialPair& pot, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& q) {
  const double a = 0.5 * (q.dot(pot.g) - p.dot(pot.f));
  PotentialPair out = pot;
  out.f.array() += a;
  out.g.array() -= a;
  out.gauge = Gauge::kMeanBalanced;
  return out;
}

PotentialPair GaugeFix(const PotentialPair& pot, const QotProblem& problem) {
  return GaugeFix(pot, problem.p_weights(), problem.q_weights());
}

ConvexPotentials ToConvexForm(const PotentialPair& pot, const PointMatrix& p_points,
                              const PointMatrix& q_points) {
  if (pot.f.size() != p_points.rows() || pot.g.size() != q_points.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "potentials do not match the supports");
  }
  ConvexPotentials out;
  out.phi = 0.5 * p_points.rowwise().squaredNorm() - pot.f;
  out.psi = 0.5 * q_points.rowwise().squaredNorm() - pot.g;
  return out;
}

double ExtendPotential(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                       const DiscreteMeasure& opposite,
                       const Eigen::VectorXd& opposite_potential, double epsilon) {
  thread_local Eigen::VectorXd c_row;
  c_row.resize(opposite.size());
  for (Eigen::Index j = 0; j < opposite.size(); ++j) {
    c_row[j] = EvalCost(x, opposite.point(j));
  }
  return CoordinateUpdateRow(opposite_potential, opposite.weights(), c_row, epsilon);
}

}  // namespace qot
