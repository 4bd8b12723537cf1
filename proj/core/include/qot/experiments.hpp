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

#ifndef QOT_EXPERIMENTS_HPP_
#define QOT_EXPERIMENTS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "qot/limit_law.hpp"
#include "qot/measures.hpp"
#include "qot/solver.hpp"
#include "qot/stats.hpp"

namespace qot {

enum class ExperimentKind {
  kCostClt,
  kPotentialRate,
  kPotentialsClt,
  kCouplingClt,
  kConsistency,
};

// Indicator of a product box [x_lower, x_upper] x [y_lower, y_upper].
struct EtaBox {
  Point x_lower, x_upper, y_lower, y_upper;

  template <typename X, typename Y>
  double operator()(const X& x, const Y& y) const {
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      if (x(k) < x_lower(k) || x(k) > x_upper(k)) return 0.0;
      if (y(k) < y_lower(k) || y(k) > y_upper(k)) return 0.0;
    }
    return 1.0;
  }
};

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  bool Contains(double v) const { return v >= lo && v <= hi; }
};

// Checks evaluated after a run; unset members are skipped.
struct ExperimentAssertions {
  std::optional<Band> coverage;             // every n
  std::optional<double> ks_max;             // largest n
  std::optional<Band> slope;                // rate fits
  std::optional<Band> variance_ratio;       // largest n
  std::optional<double> grid_bias_fraction; // of the CI half-width, largest n
  bool monotone_median = false;             // potential-rate medians
  bool final_below_first = false;           // consistency trajectory
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCostClt;
  // Used for both marginals unless population_q is set.
  DomainSpec population = DomainSpec::UnitInterval();
  std::optional<DomainSpec> population_q;
  int grid = 512;
  double epsilon = 0.5;
  std::vector<Eigen::Index> sample_sizes{100, 400, 1600};
  int replications = 100;
  std::uint64_t master_seed = 1;
  double ci_level = 0.95;
  std::optional<EtaBox> eta;
  // Population grid pair for the pointwise potentials CLT.
  IndexPair eval_pair{0, 0};
  // Coarser grid used only for the reference-bias budget; 0 disables it.
  int reference_check_grid = 0;
  double solver_tol = 0.0;
  int max_sweeps = 100000;
  // 0 means hardware concurrency.
  int threads = 0;
  ExperimentAssertions assertions;

  // Throws InvalidArgument.
  void Validate() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

// {"kind": "uniform_box", "lower": [..], "upper": [..]} or
// {"kind": "explicit", "points": [[..], ..], "weights": [..]}.
DomainSpec DomainSpecFromJson(const nlohmann::json& j);
nlohmann::json DomainSpecToJson(const DomainSpec& spec);

/// Population reference on the quadrature grid (or the explicit measure).
struct Population {
  QotProblem problem;
  PotentialPair pot;
  double cost = 0.0;
};

Population SolvePopulation(const DomainSpec& p_spec, const DomainSpec& q_spec,
                           int grid, double epsilon,
                           const AlternatingOptions& options = {});

struct ReplicationRecord {
  Eigen::Index n = 0;
  int rep = 0;
  bool ok = false;
  double cost_hat = 0.0;
  double sigma2_hat = 0.0;
  bool covered = false;
  double norm_err = 0.0;
  // Kind-specific raw statistic: sup potential error, sqrt(n) pointwise
  // error, or sqrt(n) coupling-functional error.
  double stat = 0.0;
  double vc_stat = 0.0;
};

struct SizeSummary {
  Eigen::Index n = 0;
  int completed = 0;
  int failed = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_abs_error = 0.0;
  double median_abs_error = 0.0;
  double median_vc = 0.0;
  double ks = 0.0;
  double empirical_variance = 0.0;
  double variance_ratio = 0.0;
  std::vector<double> normalized_errors;
};

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::kCostClt;
  nlohmann::json config;
  std::uint64_t seed = 0;
  double reference = 0.0;             // population cost / functional value
  double theoretical_variance = 0.0;  // sigma^2, limit variance, ...
  std::optional<double> reference_check;  // coarse-grid reference
  std::vector<SizeSummary> sizes;
  std::optional<RateFit> rate;
  std::optional<RateFit> vc_rate;
  std::vector<double> trajectory;  // consistency errors per n
  std::vector<ReplicationRecord> records;
  std::vector<AssertionResult> assertions;
  double runtime_seconds = 0.0;

  bool AllAssertionsPass() const;
  // Timing is left out unless requested so reports stay reproducible.
  nlohmann::json ToJson(bool include_timing = false) const;
  // n,rep,cost_hat,sigma2_hat,covered,norm_err
  std::string RecordsCsv() const;
  // n,theoretical,sample for normal QQ plots.
  std::string QqCsv() const;
  // n,median_error,median_vc for rate plots.
  std::string RateCsv() const;
};

ExperimentReport RunCostClt(const ExperimentConfig& config);
ExperimentReport RunPotentialRate(const ExperimentConfig& config);
ExperimentReport RunPotentialsClt(const ExperimentConfig& config);
ExperimentReport RunCouplingClt(const ExperimentConfig& config);
ExperimentReport RunConsistency(const ExperimentConfig& config);
ExperimentReport RunExperiment(const ExperimentConfig& config);

std::string ExperimentKindName(ExperimentKind kind);

}  // namespace qot

#endif  // QOT_EXPERIMENTS_HPP_
