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

#ifndef QOT_SOLVER_HPP_
#define QOT_SOLVER_HPP_

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "qot/error.hpp"
#include "qot/measures.hpp"

namespace qot {

enum class CostKind { kHalfSquaredEuclidean };

// c(x, y) = |x - y|^2 / 2. Throws DimensionMismatch on unequal sizes.
template <typename A, typename B>
double EvalCost(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cost arguments differ in size");
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double d = x(k) - y(k);
    s += d * d;
  }
  return 0.5 * s;
}

/// A quadratically regularized transport problem between two discrete
/// measures. Zero-weight atoms are dropped on construction, so indices refer
/// to the stored measures. The cost matrix is computed once and shared by
/// copies; the object is immutable and safe to share across threads.
class QotProblem {
 public:
  QotProblem(const DiscreteMeasure& p, const DiscreteMeasure& q,
             double epsilon, CostKind cost_kind = CostKind::kHalfSquaredEuclidean);

  const DiscreteMeasure& p() const { return data_->p; }
  const DiscreteMeasure& q() const { return data_->q; }
  double epsilon() const { return data_->epsilon; }
  CostKind cost_kind() const { return CostKind::kHalfSquaredEuclidean; }
  Eigen::Index rows() const { return data_->p.size(); }
  Eigen::Index cols() const { return data_->q.size(); }
  const Eigen::VectorXd& p_weights() const { return data_->p.weights(); }
  const Eigen::VectorXd& q_weights() const { return data_->q.weights(); }
  // rows() x cols(), and its transpose (kept for contiguous column access).
  const Eigen::MatrixXd& cost() const { return data_->cost; }
  const Eigen::MatrixXd& cost_transposed() const { return data_->cost_t; }

  // The problem with the roles of P and Q exchanged.
  QotProblem Swapped() const;

 private:
  struct Data {
    DiscreteMeasure p;
    DiscreteMeasure q;
    double epsilon;
    Eigen::MatrixXd cost;
    Eigen::MatrixXd cost_t;
  };
  std::shared_ptr<const Data> data_;
};

enum class Gauge { kMeanBalanced };

/// Dual variables f on P's atoms and g on Q's atoms. Only f (+) g is
/// meaningful; the gauge names the representative of (f + a, g - a).
struct PotentialPair {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
  Gauge gauge = Gauge::kMeanBalanced;
};

struct ConvexPotentials {
  Eigen::VectorXd phi;
  Eigen::VectorXd psi;
};

struct SolveReport {
  int iterations = 0;
  double final_residual = 0.0;
  // Dual objective after each sweep (or iteration), starting with the
  // initial point.
  std::vector<double> dual_values;
  bool converged = false;
};

struct SolveResult {
  PotentialPair potentials;
  SolveReport report;
};

// Raised when a solver exhausts its budget. Carries the last iterate.
class NotConverged : public Error {
 public:
  NotConverged(PotentialPair best, SolveReport report);
  const PotentialPair& best() const { return best_; }
  const SolveReport& report() const { return report_; }

 private:
  PotentialPair best_;
  SolveReport report_;
};

struct AlternatingOptions {
  // Sup-norm target for the marginal residuals; <= 0 means 1e-9 * epsilon.
  double tol = 0.0;
  int max_sweeps = 100000;
  bool record_trace = true;
};

struct GradientOptions {
  // Step in cost units; <= 0 means epsilon / 2. Update is
  // f_i += (step / epsilon) * r_f(i), and likewise for g.
  double step = 0.0;
  double tol = 0.0;
  int max_iter = 1000000;
  bool record_trace = false;
};

double DefaultTolerance(const QotProblem& problem);

// f_i + g_j - c(x_i, y_j). Throws IndexOutOfRange.
double Xi(const QotProblem& problem, const PotentialPair& pot, Eigen::Index i,
          Eigen::Index j);
Eigen::MatrixXd XiMatrix(const QotProblem& problem, const PotentialPair& pot);
// Entrywise positive part of XiMatrix.
Eigen::MatrixXd HingeMatrix(const QotProblem& problem, const PotentialPair& pot);

/// sum_i p_i f_i + sum_j q_j g_j - (1 / 2 eps) sum_ij p_i q_j (xi_ij)_+^2.
double DualObjective(const QotProblem& problem, const PotentialPair& pot);

/// First-order residuals r_f(i) = eps - sum_j q_j (xi_ij)_+ and
/// r_g(j) = eps - sum_i p_i (xi_ij)_+.
///
/// Sign convention: dD/df_i = (p_i / eps) * r_f(i) and
/// dD/dg_j = (q_j / eps) * r_g(j), so a positive residual means the dual
/// increases when that coordinate increases.
struct Residuals {
  Eigen::VectorXd row;
  Eigen::VectorXd col;
  double SupNorm() const;
};
Residuals MarginalResiduals(const QotProblem& problem, const PotentialPair& pot);

// Analytic partial derivatives of DualObjective, from the residuals.
PotentialPair DualGradient(const QotProblem& problem, const PotentialPair& pot);

/// The unique t with sum_j q_j (t + g_j - c_row_j)_+ = eps.
///
/// Sorts the thresholds a_j = c_row_j - g_j ascending and scans prefix sums
/// of q and q * a for the linear piece containing the root; the root is
/// then closed-form. When the all-active candidate already clears every
/// threshold the sort is skipped. Zero-weight entries are ignored.
/// Throws NonpositiveEpsilon, InvalidArgument when sum q <= 0.
double CoordinateUpdateRow(const Eigen::Ref<const Eigen::VectorXd>& g,
                           const Eigen::Ref<const Eigen::VectorXd>& q,
                           const Eigen::Ref<const Eigen::VectorXd>& c_row,
                           double epsilon);

/// Exact block coordinate ascent: every f_i maximized given g, then every
/// g_j given f, until the residual sup-norm is at most tol. The dual trace is
/// nondecreasing. Throws NotConverged after max_sweeps.
SolveResult SolveAlternating(const QotProblem& problem,
                             const AlternatingOptions& options = {},
                             const std::optional<PotentialPair>& start = {});

/// Simultaneous preconditioned gradient ascent on the dual. Slower than the
/// alternating method; kept as an independent cross-check.
SolveResult SolveGradient(const QotProblem& problem,
                          const GradientOptions& options = {},
                          const std::optional<PotentialPair>& start = {});

// (f + a, g - a) with a = (sum q g - sum p f) / 2.
PotentialPair GaugeFix(const PotentialPair& pot, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& q);
PotentialPair GaugeFix(const PotentialPair& pot, const QotProblem& problem);

/// Brute-force solver for tiny instances (n * m <= 12): tries every
/// candidate support, solves the linear first-order system on it and keeps
/// the first support whose slack has the right signs on and off it.
/// Throws TooLarge or NoConsistentActiveSet.
PotentialPair ActiveSetOracle(const QotProblem& problem);

// phi_i = |x_i|^2 / 2 - f_i, psi_j = |y_j|^2 / 2 - g_j.
ConvexPotentials ToConvexForm(const PotentialPair& pot, const PointMatrix& p_points,
                              const PointMatrix& q_points);

/// Continuous extension of a potential to an arbitrary point x: the value t
/// solving the first-order condition for x against `opposite` (with the
/// opposite potential fixed).
double ExtendPotential(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                       const DiscreteMeasure& opposite,
                       const Eigen::VectorXd& opposite_potential, double epsilon);

}  // namespace qot

#endif  // QOT_SOLVER_HPP_
