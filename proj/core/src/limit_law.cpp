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

#include "qot/limit_law.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "qot/io.hpp"
#include "qot/rng.hpp"

namespace qot {

namespace {

struct SectionMasses {
  Eigen::VectorXd x;  // Q(S_i)
  Eigen::VectorXd y;  // P(T_j)
};

SectionMasses ComputeSectionMasses(const QotProblem& problem, const Eigen::MatrixXd& xi) {
  const Eigen::Index n = problem.rows();
  const Eigen::Index m = problem.cols();
  SectionMasses s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (xi(i, j) >= 0.0) {
        s.x[i] += problem.q_weights()[j];
        s.y[j] += problem.p_weights()[i];
      }
    }
  }
  if (n > 0 && !(s.x.minCoeff() > 0.0)) {
    throw Error(ErrorCode::kEmptySection, "a source atom has an empty support section");
  }
  if (m > 0 && !(s.y.minCoeff() > 0.0)) {
    throw Error(ErrorCode::kEmptySection, "a target atom has an empty support section");
  }
  return s;
}

// Centered covariance of the columns of `values` (variables x outcomes)
// under outcome weights w.
Eigen::MatrixXd WeightedCovariance(const Eigen::MatrixXd& values, const Eigen::VectorXd& w) {
  const Eigen::VectorXd mean = values * w;
  Eigen::MatrixXd centered = values.colwise() - mean;
  Eigen::MatrixXd scaled = centered * w.asDiagonal();
  Eigen::MatrixXd cov = scaled * centered.transpose();
  return 0.5 * (cov + cov.transpose());
}

Eigen::VectorXd GaugeDirection(Eigen::Index n, Eigen::Index m) {
  Eigen::VectorXd e(n + m);
  e.head(n).setOnes();
  e.tail(m).setConstant(-1.0);
  return e;
}

}  // namespace

Eigen::MatrixXd BuildOperator(const QotProblem& problem, const PotentialPair& pot) {
  const Eigen::MatrixXd xi = XiMatrix(problem, pot);
  const SectionMasses s = ComputeSectionMasses(problem, xi);
  const Eigen::Index n = problem.rows();
  const Eigen::Index m = problem.cols();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + m, n + m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (xi(i, j) >= 0.0) {
        a(i, n + j) = problem.q_weights()[j] / s.x[i];
        a(n + j, i) = problem.p_weights()[i] / s.y[j];
      }
    }
  }
  return a;
}

LInverse InvertL(const Eigen::MatrixXd& a_matrix, const Eigen::VectorXd& p,
                 const Eigen::VectorXd& q) {
  const Eigen::Index n = p.size();
  const Eigen::Index m = q.size();
  const Eigen::Index dim = n + m;
  if (a_matrix.rows() != dim || a_matrix.cols() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "operator size does not match the marginals");
  }
  // Bordered system [[I + A, -e], [(p, -q), 0]] [u; a] = [v; 0].
  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
  bordered.topLeftCorner(dim, dim) = a_matrix;
  bordered.topLeftCorner(dim, dim).diagonal().array() += 1.0;
  bordered.topRightCorner(dim, 1) = -GaugeDirection(n, m);
  bordered.bottomLeftCorner(1, n) = p.transpose();
  bordered.block(dim, n, 1, m) = -q.transpose();

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(bordered);
  const Eigen::MatrixXd inv = lu.inverse();
  const double norm = bordered.cwiseAbs().colwise().sum().maxCoeff();
  const double inv_norm = inv.cwiseAbs().colwise().sum().maxCoeff();
  const double cond = norm * inv_norm;
  if (!std::isfinite(cond) || cond > 1e13) {
    throw Error(ErrorCode::kSingularOnQuotient,
                "bordered operator is numerically singular (condition " +
                    FormatDouble(cond) + ")");
  }
  LInverse out;
  out.matrix = inv.topLeftCorner(dim, dim);
  out.gauge_multiplier = inv.bottomLeftCorner(1, dim);
  out.condition_number = cond;
  out.source_size = n;
  Eigen::VectorXd probe(dim);
  for (Eigen::Index k = 0; k < dim; ++k) probe[k] = std::sin(1.0 + 0.7 * static_cast<double>(k));
  out.probe_residual = QuotientResidual(a_matrix, out, probe);
  if (!(out.probe_residual <= 1e-9 * probe.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::kSingularOnQuotient,
                "round-trip residual " + FormatDouble(out.probe_residual));
  }
  return out;
}

double QuotientResidual(const Eigen::MatrixXd& a_matrix, const LInverse& inverse,
                        const Eigen::VectorXd& v) {
  const Eigen::Index dim = v.size();
  const Eigen::VectorXd u = inverse.matrix * v;
  const double a = inverse.gauge_multiplier.dot(v);
  Eigen::VectorXd r = u + a_matrix * u - v;
  const Eigen::Index n = inverse.source_size;
  for (Eigen::Index k = 0; k < dim; ++k) r[k] -= k < n ? a : -a;
  return r.cwiseAbs().maxCoeff();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GaussianCovariances(const QotProblem& problem,
                                                                const PotentialPair& pot) {
  const Eigen::MatrixXd h = HingeMatrix(problem, pot);
  return {WeightedCovariance(h, problem.q_weights()),
          WeightedCovariance(h.transpose(), problem.p_weights())};
}

LimitLawModel BuildLimitLawModel(const QotProblem& problem, const PotentialPair& pot) {
  LimitLawModel model{problem, pot, XiMatrix(problem, pot), {}, {}, {}, {}, {}, {}, 0.0};
  const SectionMasses s = ComputeSectionMasses(problem, model.xi);
  model.section_mass_x = s.x;
  model.section_mass_y = s.y;
  model.a_matrix = BuildOperator(problem, pot);
  model.l_inverse = InvertL(model.a_matrix, problem.p_weights(), problem.q_weights());
  auto [gq, gp] = GaussianCovariances(problem, pot);
  model.cov_gq = std::move(gq);
  model.cov_gp = std::move(gp);
  model.cost_sigma2 = CostVariancePlugin(problem, pot);
  return model;
}

Eigen::MatrixXd PotentialsLimitCov(const LimitLawModel& model,
                                   const std::vector<IndexPair>& eval_pairs) {
  const Eigen::Index n = model.problem.rows();
  const Eigen::Index m = model.problem.cols();
  const auto k = static_cast<Eigen::Index>(eval_pairs.size());
  // Row r of `reduce` maps the Gaussian pair to the (f + g)(x_i, y_j)
  // perturbation: (e_i + e_{n+j})^T L^{-1} diag(1/Q(S), 1/P(T)).
  Eigen::MatrixXd reduce(k, n + m);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto [i, j] = eval_pairs[static_cast<std::size_t>(r)];
    if (i < 0 || i >= n || j < 0 || j >= m) {
      throw Error(ErrorCode::kIndexOutOfRange, "evaluation pair out of range");
    }
    reduce.row(r) = model.l_inverse.matrix.row(i) + model.l_inverse.matrix.row(n + j);
  }
  Eigen::VectorXd scale(n + m);
  scale.head(n) = model.section_mass_x.cwiseInverse();
  scale.tail(m) = model.section_mass_y.cwiseInverse();
  reduce = reduce * scale.asDiagonal();
  const Eigen::MatrixXd rf = reduce.leftCols(n);
  const Eigen::MatrixXd rg = reduce.rightCols(m);
  Eigen::MatrixXd cov = rf * model.cov_gq * rf.transpose() + rg * model.cov_gp * rg.transpose();
  return 0.5 * (cov + cov.transpose());
}

double CostVariancePlugin(const QotProblem& problem, const PotentialPair& pot) {
  const Eigen::MatrixXd h2 = HingeMatrix(problem, pot).cwiseAbs2();
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  const double inv2eps = 1.0 / (2.0 * problem.epsilon());
  // v(i, j) = row_part(i) + col_part(j).
  const Eigen::VectorXd row_part = pot.f - inv2eps * (h2 * q);
  const Eigen::VectorXd col_part = pot.g - inv2eps * (h2.transpose() * p);
  const double mean = p.dot(row_part) + q.dot(col_part);
  double var = 0.0;
  for (Eigen::Index j = 0; j < problem.cols(); ++j) {
    double col_sum = 0.0;
    for (Eigen::Index i = 0; i < problem.rows(); ++i) {
      const double d = row_part[i] + col_part[j] - mean;
      col_sum += p[i] * d * d;
    }
    var += q[j] * col_sum;
  }
  return var;
}

bool ConfidenceInterval::Contains(double value) const {
  return value >= lower() && value <= upper();
}

double NormalQuantile(double probability) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile probability outside (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), probability);
}

double NormalCdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

ConfidenceInterval CostCi(double cost_hat, double sigma2_hat, std::int64_t n, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::kInvalidLevel, "level must lie in (0, 1)");
  }
  if (!(sigma2_hat >= 0.0) || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need sigma2 >= 0 and n >= 1");
  }
  const double z = NormalQuantile(0.5 * (1.0 + level));
  return {cost_hat, z * std::sqrt(sigma2_hat / static_cast<double>(n)), level, n};
}

double CouplingFunctionalVariance(const LimitLawModel& model, const Eigen::MatrixXd& eta,
                                  PerturbationWeight weight) {
  const QotProblem& problem = model.problem;
  const Eigen::Index n = problem.rows();
  const Eigen::Index m = problem.cols();
  if (eta.rows() != n || eta.cols() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "eta must be sampled on the product grid");
  }
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  const Eigen::MatrixXd hinge = model.xi.cwiseMax(0.0);
  if (!(hinge.maxCoeff() > 0.0)) {
    throw Error(ErrorCode::kEmptySupport, "slack is nonpositive everywhere");
  }
  const Eigen::MatrixXd product = p * q.transpose();
  const Eigen::MatrixXd support = (model.xi.array() >= 0.0).cast<double>().matrix();

  // eta_bar = eta - int_{xi >= 0} eta d(P x Q).
  const double support_mean = product.cwiseProduct(support).cwiseProduct(eta).sum();
  const Eigen::MatrixXd eta_bar = eta.array() - support_mean;

  const Eigen::MatrixXd& w_kernel = weight == PerturbationWeight::kSupportIndicator ? support : hinge;
  const Eigen::MatrixXd w = product.cwiseProduct(eta_bar).cwiseProduct(w_kernel);
  Eigen::VectorXd r(n + m);
  r.head(n) = w.rowwise().sum();
  r.tail(m) = w.colwise().sum().transpose();

  // int U(., ., x_a, y_b) w d(P x Q) = r^T L^{-1} v(a, b) with
  // v(a, b) = ((xi(., y_b))_+ / Q(S.), (xi(x_a, .))_+ / P(T.)), which splits into
  // a Y-part and an X-part.
  const Eigen::VectorXd z = model.l_inverse.matrix.transpose() * r;
  const Eigen::VectorXd y_part =
      hinge.transpose() * z.head(n).cwiseQuotient(model.section_mass_x);
  const Eigen::VectorXd x_part = hinge * z.tail(m).cwiseQuotient(model.section_mass_y);
  const Eigen::MatrixXd direct = eta_bar.cwiseProduct(hinge);

  const double mean_y_part = q.dot(y_part);
  const double mean_x_part = p.dot(x_part);
  const Eigen::VectorXd v_x = x_part.array() + mean_y_part - (direct * q).array();
  const Eigen::VectorXd v_y = y_part.array() + mean_x_part - (direct.transpose() * p).array();

  const double mean = p.dot(v_x) + q.dot(v_y);
  double var = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    double col_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = v_x[i] + v_y[j] - mean;
      col_sum += p[i] * d * d;
    }
    var += q[j] * col_sum;
  }
  return var;
}

Eigen::MatrixXd SampleLimitGaussian(const LimitLawModel& model,
                                    const std::vector<IndexPair>& eval_pairs,
                                    std::uint64_t seed, Eigen::Index count) {
  const Eigen::MatrixXd cov = PotentialsLimitCov(model, eval_pairs);
  const Eigen::Index k = cov.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kFactorizationFailure, "eigendecomposition failed");
  }
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index r = 0; r < k; ++r) {
    if (lambda[r] < -1e-8) {
      throw Error(ErrorCode::kFactorizationFailure,
                  "covariance eigenvalue " + FormatDouble(lambda[r]));
    }
    lambda[r] = std::max(lambda[r], 0.0);
  }
  const Eigen::MatrixXd factor = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  CounterRng rng(seed, 0);
  Eigen::MatrixXd z(count, k);
  for (Eigen::Index r = 0; r < count; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) z(r, c) = rng.Normal();
  }
  return z * factor.transpose();
}

nlohmann::json ModelSummaryJson(const LimitLawModel& model) {
  auto eigen_range = [](const Eigen::MatrixXd& cov) {
    if (cov.size() == 0) return nlohmann::json::array({0.0, 0.0});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    return nlohmann::json::array({eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()});
  };
  // Same covariance built from the raw slack instead of its positive part.
  const Eigen::MatrixXd xi_form = WeightedCovariance(model.xi, model.problem.q_weights());
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["n"] = model.problem.rows();
  j["m"] = model.problem.cols();
  j["epsilon"] = model.problem.epsilon();
  j["operator_condition_number"] = model.l_inverse.condition_number;
  j["inverse_probe_residual"] = model.l_inverse.probe_residual;
  j["cost_sigma2"] = model.cost_sigma2;
  j["min_section_mass_x"] = model.section_mass_x.minCoeff();
  j["min_section_mass_y"] = model.section_mass_y.minCoeff();
  j["cov_gq_eigen_range"] = eigen_range(model.cov_gq);
  j["cov_gp_eigen_range"] = eigen_range(model.cov_gp);
  j["cov_gq_slack_form_difference"] = (xi_form - model.cov_gq).norm();
  return j;
}

}  // namespace qot
