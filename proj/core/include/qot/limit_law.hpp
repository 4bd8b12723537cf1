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

#ifndef QOT_LIMIT_LAW_HPP_
#define QOT_LIMIT_LAW_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "qot/solver.hpp"

namespace qot {

using IndexPair = std::pair<Eigen::Index, Eigen::Index>;

/// Discretized operator A of L = I + A on (f, g) in R^{n+m}.
///
/// Block off-diagonal: the f-rows average g over the support section S_i
/// with weights q_j / Q(S_i), the g-rows average f over T_j with weights
/// p_i / P(T_j). Both blocks are row-stochastic. Throws EmptySection.
Eigen::MatrixXd BuildOperator(const QotProblem& problem, const PotentialPair& pot);

/// Inverse of L on the quotient by the gauge direction e = (1, -1).
///
/// For any v the map returns the u with (I + A) u = v + a e for some scalar a
/// and sum p u_f = sum q u_g. The raw range of I + A misses e, so v is only
/// matched modulo e; `gauge_multiplier` gives the a for a given v.
struct LInverse {
  Eigen::MatrixXd matrix;      // (n+m) x (n+m), v -> u
  Eigen::RowVectorXd gauge_multiplier;  // v -> a
  double condition_number = 0.0;        // 1-norm, of the bordered system
  double probe_residual = 0.0;          // quotient residual on a fixed probe
  Eigen::Index source_size = 0;         // n, where the gauge direction flips sign
};

// Throws SingularOnQuotient when the bordered system is numerically singular.
LInverse InvertL(const Eigen::MatrixXd& a_matrix, const Eigen::VectorXd& p,
                 const Eigen::VectorXd& q);

// sup-norm of (I + A) u - v - a e with the gauge multiplier a for v.
double QuotientResidual(const Eigen::MatrixXd& a_matrix, const LInverse& inverse,
                        const Eigen::VectorXd& v);

/// Covariances of the centered hinge processes
/// U_Q(x) = (xi(x, Y))_+ - E(xi(x, Y))_+ and the analogous U_P.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GaussianCovariances(
    const QotProblem& problem, const PotentialPair& pot);

struct LimitLawModel {
  QotProblem problem;
  PotentialPair pot;
  Eigen::MatrixXd xi;  // n x m slack
  Eigen::VectorXd section_mass_x;  // Q(S_i)
  Eigen::VectorXd section_mass_y;  // P(T_j)
  Eigen::MatrixXd a_matrix;
  LInverse l_inverse;
  Eigen::MatrixXd cov_gq;
  Eigen::MatrixXd cov_gp;
  double cost_sigma2 = 0.0;
};

LimitLawModel BuildLimitLawModel(const QotProblem& problem, const PotentialPair& pot);

/// Covariance of the limit of sqrt(n) (f_n + g_n - f - g)(x_i, y_j) at the
/// requested index pairs: the Gaussian pair pushed through
/// -L^{-1} diag(1 / Q(S), 1 / P(T)).
Eigen::MatrixXd PotentialsLimitCov(const LimitLawModel& model,
                                   const std::vector<IndexPair>& eval_pairs);

/// Variance over P (x) Q of
/// f(X) + g(Y) - (1 / 2 eps) (int (xi(x, Y))_+^2 dP(x) + int (xi(X, y))_+^2 dQ(y)),
/// by exact summation. Gauge-invariant.
double CostVariancePlugin(const QotProblem& problem, const PotentialPair& pot);

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.0;
  std::int64_t n = 0;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool Contains(double value) const;
};

// Standard normal quantile and CDF.
double NormalQuantile(double probability);
double NormalCdf(double x);

// center +- z_{(1+level)/2} sqrt(sigma2 / n). Throws InvalidLevel.
ConfidenceInterval CostCi(double cost_hat, double sigma2_hat, std::int64_t n,
                          double level);

// Weighting of the potential-perturbation term inside V_X, V_Y.
enum class PerturbationWeight {
  // 1{xi >= 0}: derivative of the hinge, matches the linearization.
  kSupportIndicator,
  // (xi)_+, the literal displayed form; kept for comparison only.
  kHinge,
};

/// sigma^2(eta) = Var(V_X + V_Y) for the coupling functional int eta dpi;
/// `eta` holds eta(x_i, y_j). The CLT variance of sqrt(n) int eta d(pi_n - pi)
/// is this value divided by eps^2. Throws EmptySupport.
double CouplingFunctionalVariance(
    const LimitLawModel& model, const Eigen::MatrixXd& eta,
    PerturbationWeight weight = PerturbationWeight::kSupportIndicator);
/// `count` draws (rows) of the Gaussian limit at the requested pairs.
/// Eigenvalues in [-1e-8, 0) are clamped to zero, anything more negative
/// throws FactorizationFailure.
Eigen::MatrixXd SampleLimitGaussian(const LimitLawModel& model,
                                    const std::vector<IndexPair>& eval_pairs,
                                    std::uint64_t seed, Eigen::Index count);

// Operator condition number, sigma^2, min section masses, covariance
// eigenvalue ranges.
nlohmann::json ModelSummaryJson(const LimitLawModel& model);

}  // namespace qot

#endif  // QOT_LIMIT_LAW_HPP_
