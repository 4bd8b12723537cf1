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

#include "qot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "qot/io.hpp"

namespace qot {

namespace {

void CheckConvex(const QotProblem& problem, const ConvexPotentials& pot) {
  if (pot.phi.size() != problem.rows() || pot.psi.size() != problem.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "potentials do not match the problem");
  }
}

// <x_i, y_j> - phi_i - psi_j for one row.
Eigen::VectorXd SlackRow(const QotProblem& problem, const ConvexPotentials& pot,
                         Eigen::Index i) {
  Eigen::VectorXd row =
      problem.q().points() * problem.p().points().row(i).transpose();
  row.array() -= pot.phi[i];
  row -= pot.psi;
  return row;
}

}  // namespace

Probe ConstantProbe(double value) {
  return [value](const Eigen::Ref<const Eigen::RowVectorXd>&) { return value; };
}

SectionReport Section(const QotProblem& problem, const ConvexPotentials& pot,
                      Eigen::Index x_index, double beta) {
  CheckConvex(problem, pot);
  if (x_index < 0 || x_index >= problem.rows()) {
    throw Error(ErrorCode::kIndexOutOfRange, "x index out of range");
  }
  const Eigen::VectorXd slack = SlackRow(problem, pot, x_index);
  SectionReport r;
  r.x_index = x_index;
  r.beta = beta;
  Eigen::VectorXd weighted_sum = Eigen::VectorXd::Zero(problem.q().dim());
  for (Eigen::Index j = 0; j < problem.cols(); ++j) {
    // phi + psi <= <x, y> + beta  <=>  slack >= -beta
    if (slack[j] >= -beta) {
      r.member_indices.push_back(j);
      r.mass += problem.q_weights()[j];
      weighted_sum += problem.q_weights()[j] * problem.q().point(j).transpose();
    }
  }
  if (r.mass > 0.0) r.barycenter = weighted_sum / r.mass;
  return r;
}

double MinSectionMass(const QotProblem& problem, const ConvexPotentials& pot) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    best = std::min(best, Section(problem, pot, i, 0.0).mass);
  }
  return best;
}

Eigen::VectorXd BarycenterGradient(const QotProblem& problem, const ConvexPotentials& pot,
                                   Eigen::Index x_index) {
  SectionReport r = Section(problem, pot, x_index, 0.0);
  if (!(r.mass > 0.0)) {
    throw Error(ErrorCode::kEmptySection,
                "support section of atom " + std::to_string(x_index) + " is empty");
  }
  return r.barycenter;
}

double LipschitzBetaDiagnostic(const QotProblem& problem, const ConvexPotentials& pot,
                               const std::vector<double>& beta_grid,
                               const std::vector<Probe>& probes) {
  CheckConvex(problem, pot);
  std::vector<double> betas = beta_grid;
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
  if (betas.size() < 2 || probes.empty()) return 0.0;

  const Eigen::VectorXd& q = problem.q_weights();
  std::vector<Eigen::VectorXd> weighted;  // q_j g(y_j) per probe
  for (const auto& probe : probes) {
    Eigen::VectorXd v(problem.cols());
    for (Eigen::Index j = 0; j < problem.cols(); ++j) v[j] = q[j] * probe(problem.q().point(j));
    weighted.push_back(std::move(v));
  }
  double best = 0.0;
  std::vector<double> integrals(betas.size());
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    const Eigen::VectorXd slack = SlackRow(problem, pot, i);
    for (const auto& w : weighted) {
      for (std::size_t b = 0; b < betas.size(); ++b) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < problem.cols(); ++j) {
          if (slack[j] >= -betas[b]) s += w[j];
        }
        integrals[b] = s;
      }
      for (std::size_t b = 0; b + 1 < betas.size(); ++b) {
        best = std::max(best, std::abs(integrals[b + 1] - integrals[b]) /
                                  (betas[b + 1] - betas[b]));
      }
    }
  }
  return best;
}

GradientLipschitz GradientLipschitzDiagnostic(const QotProblem& problem,
                                              const ConvexPotentials& pot) {
  CheckConvex(problem, pot);
  const Eigen::Index n = problem.rows();
  const PointMatrix& x = problem.p().points();
  std::vector<Eigen::VectorXd> grads;
  std::vector<double> masses;
  for (Eigen::Index i = 0; i < n; ++i) {
    SectionReport r = Section(problem, pot, i, 0.0);
    if (!(r.mass > 0.0)) {
      throw Error(ErrorCode::kEmptySection, "empty support section in diagnostic");
    }
    grads.push_back(r.barycenter);
    masses.push_back(r.mass);
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double d = (x.row(a) - x.row(b)).norm();
      if (d > 0.0) min_dist = std::min(min_dist, d);
    }
  }
  GradientLipschitz out;
  if (!std::isfinite(min_dist)) return out;
  const double cutoff = min_dist * (1.0 + 1e-9);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double d = (x.row(a) - x.row(b)).norm();
      if (d <= 0.0 || d > cutoff) continue;
      const auto ua = static_cast<std::size_t>(a);
      const auto ub = static_cast<std::size_t>(b);
      out.gradient = std::max(out.gradient, (grads[ua] - grads[ub]).norm() / d);
      out.mass = std::max(out.mass, std::abs(masses[ua] - masses[ub]) / d);
    }
  }
  return out;
}

double VcSupDeviation(const QotProblem& population, const PotentialPair& pot,
                      const DiscreteMeasure& q_n, const Probe& probe) {
  if (q_n.dim() != population.q().dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample dimension");
  }
  const DiscreteMeasure& q = population.q();
  std::map<std::vector<double>, Eigen::Index> atom_index;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    atom_index.emplace(std::vector<double>(q.point(j).begin(), q.point(j).end()), j);
  }
  // g on the sample atoms and the signed, probe-weighted masses.
  const Eigen::Index m = q.size();
  const Eigen::Index k = q_n.size();
  Eigen::VectorXd g_all(m + k);
  Eigen::VectorXd signed_mass(m + k);
  PointMatrix pts(m + k, q.dim());
  for (Eigen::Index j = 0; j < m; ++j) {
    g_all[j] = pot.g[j];
    signed_mass[j] = q.weight(j) * probe(q.point(j));
    pts.row(j) = q.point(j);
  }
  for (Eigen::Index s = 0; s < k; ++s) {
    const auto row = q_n.point(s);
    auto it = atom_index.find(std::vector<double>(row.begin(), row.end()));
    g_all[m + s] = it != atom_index.end()
                       ? pot.g[it->second]
                       : ExtendPotential(row, population.p(), pot.f, population.epsilon());
    signed_mass[m + s] = -q_n.weight(s) * probe(row);
    pts.row(m + s) = row;
  }

  double best = 0.0;
  std::vector<std::pair<double, double>> order(static_cast<std::size_t>(m + k));
  for (Eigen::Index i = 0; i < population.rows(); ++i) {
    const auto x = population.p().point(i);
    for (Eigen::Index r = 0; r < m + k; ++r) {
      const double xi = pot.f[i] + g_all[r] - EvalCost(x, pts.row(r));
      order[static_cast<std::size_t>(r)] = {-xi, signed_mass[r]};
    }
    // S_x(delta) = {xi >= -delta} is a prefix in increasing -xi.
    std::sort(order.begin(), order.end());
    double cum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      cum += order[r].second;
      if (r + 1 == order.size() || order[r + 1].first != order[r].first) {
        best = std::max(best, std::abs(cum));
      }
    }
  }
  return best;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> ProductThickening(
    const QotProblem& problem, const PotentialPair& pot, double beta) {
  const Eigen::MatrixXd xi = XiMatrix(problem, pot);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index i = 0; i < problem.rows(); ++i) {
    for (Eigen::Index j = 0; j < problem.cols(); ++j) {
      if (xi(i, j) >= -beta) out.emplace_back(i, j);
    }
  }
  return out;
}

void WriteDiagnosticsCsv(std::ostream& out, const std::vector<DiagnosticRow>& rows) {
  out << "# format_version: " << kFormatVersion << '\n' << "diagnostic,param,value\n";
  for (const auto& r : rows) {
    out << r.diagnostic << ',' << r.param << ',' << FormatDouble(r.value) << '\n';
  }
}

}  // namespace qot
