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
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "qot/solver.hpp"

namespace qot {

namespace {

constexpr Eigen::Index kMaxOracleCells = 12;

// Connected components of the bipartite support graph; rows are nodes
// 0..n-1, columns n..n+m-1.
std::vector<int> Components(Eigen::Index n, Eigen::Index m, std::uint32_t mask,
                            int* count) {
  std::vector<int> parent(static_cast<std::size_t>(n + m));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      v = parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
    }
    return v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mask >> (i * m + j) & 1U) {
        parent[static_cast<std::size_t>(find(static_cast<int>(i)))] =
            find(static_cast<int>(n + j));
      }
    }
  }
  std::vector<int> label(static_cast<std::size_t>(n + m), -1);
  std::vector<int> root_label(static_cast<std::size_t>(n + m), -1);
  *count = 0;
  for (Eigen::Index v = 0; v < n + m; ++v) {
    const int r = find(static_cast<int>(v));
    if (root_label[static_cast<std::size_t>(r)] < 0) {
      root_label[static_cast<std::size_t>(r)] = (*count)++;
    }
    label[static_cast<std::size_t>(v)] = root_label[static_cast<std::size_t>(r)];
  }
  return label;
}

// Bellman-Ford feasibility for x_u - x_v <= w over edges (v -> u, w).
bool SolveDifferenceConstraints(int nodes,
                                const std::vector<std::tuple<int, int, double>>& edges,
                                std::vector<double>* x) {
  x->assign(static_cast<std::size_t>(nodes), 0.0);
  for (int round = 0; round <= nodes; ++round) {
    bool changed = false;
    for (const auto& [u, v, w] : edges) {
      const double cand = (*x)[static_cast<std::size_t>(v)] + w;
      if (cand < (*x)[static_cast<std::size_t>(u)] - 1e-15) {
        (*x)[static_cast<std::size_t>(u)] = cand;
        changed = true;
      }
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace

PotentialPair ActiveSetOracle(const QotProblem& problem) {
  const Eigen::Index n = problem.rows();
  const Eigen::Index m = problem.cols();
  if (n * m > kMaxOracleCells) {
    throw Error(ErrorCode::kTooLarge, "oracle handles at most 12 cells");
  }
  const double eps = problem.epsilon();
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  const Eigen::MatrixXd& c = problem.cost();
  const double scale = std::max({1.0, eps, c.cwiseAbs().maxCoeff()});
  const double sign_tol = 1e-11 * scale;
  const Eigen::Index unknowns = n + m;
  const std::uint32_t cells = static_cast<std::uint32_t>(n * m);

  for (std::uint32_t mask = 1; mask < (1U << cells); ++mask) {
    auto on = [&](Eigen::Index i, Eigen::Index j) {
      return (mask >> (i * m + j) & 1U) != 0U;
    };
    bool covers = true;
    for (Eigen::Index i = 0; i < n && covers; ++i) {
      bool any = false;
      for (Eigen::Index j = 0; j < m; ++j) any = any || on(i, j);
      covers = any;
    }
    for (Eigen::Index j = 0; j < m && covers; ++j) {
      bool any = false;
      for (Eigen::Index i = 0; i < n; ++i) any = any || on(i, j);
      covers = any;
    }
    if (!covers) continue;

    int ncomp = 0;
    const std::vector<int> comp = Components(n, m, mask, &ncomp);

    // Row and column first-order equations on the candidate support, plus one
    // gauge pin per connected component.
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(unknowns + ncomp, unknowns);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns + ncomp);
    for (Eigen::Index i = 0; i < n; ++i) {
      rhs[i] = eps;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!on(i, j)) continue;
        sys(i, i) += q[j];
        sys(i, n + j) += q[j];
        rhs[i] += q[j] * c(i, j);
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      rhs[n + j] = eps;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!on(i, j)) continue;
        sys(n + j, n + j) += p[i];
        sys(n + j, i) += p[i];
        rhs[n + j] += p[i] * c(i, j);
      }
    }
    for (Eigen::Index v = 0; v < unknowns; ++v) {
      sys(unknowns + comp[static_cast<std::size_t>(v)], v) = v < n ? 1.0 : -1.0;
    }
    const Eigen::VectorXd sol = sys.completeOrthogonalDecomposition().solve(rhs);
    if ((sys * sol - rhs).cwiseAbs().maxCoeff() > 1e-10 * scale) continue;

    PotentialPair pot{sol.head(n), sol.tail(m), Gauge::kMeanBalanced};
    Eigen::MatrixXd xi = XiMatrix(problem, pot);

    bool ok = true;
    std::vector<std::tuple<int, int, double>> edges;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      for (Eigen::Index j = 0; j < m && ok; ++j) {
        const int ci = comp[static_cast<std::size_t>(i)];
        const int cj = comp[static_cast<std::size_t>(n + j)];
        if (on(i, j)) {
          ok = xi(i, j) >= -sign_tol;
        } else if (ci == cj) {
          ok = xi(i, j) <= sign_tol;
        } else {
          // Shifting component k by s_k (f + s_k, g - s_k) moves xi_ij by
          // s_ci - s_cj; require the result to stay <= 0.
          edges.emplace_back(ci, cj, -xi(i, j));
        }
      }
    }
    if (!ok) continue;
    std::vector<double> shift;
    if (!SolveDifferenceConstraints(ncomp, edges, &shift)) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      pot.f[i] += shift[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])];
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      pot.g[j] -= shift[static_cast<std::size_t>(comp[static_cast<std::size_t>(n + j)])];
    }
    return GaugeFix(pot, problem);
  }
  throw Error(ErrorCode::kNoConsistentActiveSet, "no support passes the sign checks");
}

}  // namespace qot
