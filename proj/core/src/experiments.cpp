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

#include "qot/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qot/error.hpp"
#include "qot/geometry.hpp"
#include "qot/io.hpp"
#include "qot/rng.hpp"

namespace qot {

namespace {

constexpr std::uint64_t kRoleX = 0;
constexpr std::uint64_t kRoleY = 1;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void RunParallel(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto loop = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        task(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = count;
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

const DomainSpec& QSpec(const ExperimentConfig& config) {
  return config.population_q ? *config.population_q : config.population;
}

DiscreteMeasure Draw(const DomainSpec& spec, Eigen::Index n, std::uint64_t seed,
                     std::uint64_t stream) {
  if (spec.kind == DomainSpec::Kind::kExplicit) {
    return SampleEmpirical(*spec.measure, n, seed, stream).MergeDuplicates();
  }
  return SampleEmpirical(spec, n, seed, stream);
}

AlternatingOptions SolverOptions(const ExperimentConfig& config) {
  AlternatingOptions opts;
  opts.tol = config.solver_tol;
  opts.max_sweeps = config.max_sweeps;
  opts.record_trace = false;
  return opts;
}

// err / sqrt(var), with exact zeros kept at zero when the variance vanishes.
double Normalize(double err, double var) {
  if (var > 1e-20) return err / std::sqrt(var);
  if (std::abs(err) <= 1e-8) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), err);
}

struct EmpiricalFit {
  QotProblem problem;
  PotentialPair pot;
};

// Solves the empirical problem; nullopt on NotConverged.
std::optional<EmpiricalFit> SolveEmpirical(const DiscreteMeasure& pn, const DiscreteMeasure& qn,
                                           const ExperimentConfig& config) {
  QotProblem problem(pn, qn, config.epsilon);
  try {
    SolveResult res = SolveAlternating(problem, SolverOptions(config));
    return EmpiricalFit{problem, std::move(res.potentials)};
  } catch (const NotConverged&) {
    return std::nullopt;
  }
}

// Empirical potentials extended to the population atoms.
PotentialPair ExtendToPopulation(const EmpiricalFit& fit, const Population& pop) {
  const double eps = pop.problem.epsilon();
  PotentialPair out;
  out.f.resize(pop.problem.rows());
  out.g.resize(pop.problem.cols());
  for (Eigen::Index i = 0; i < pop.problem.rows(); ++i) {
    out.f[i] = ExtendPotential(pop.problem.p().point(i), fit.problem.q(), fit.pot.g, eps);
  }
  for (Eigen::Index j = 0; j < pop.problem.cols(); ++j) {
    out.g[j] = ExtendPotential(pop.problem.q().point(j), fit.problem.p(), fit.pot.f, eps);
  }
  return out;
}

// sup_{i,j} |(f_n + g_n)(x_i, y_j) - (f + g)(x_i, y_j)|.
double SupSumError(const PotentialPair& extended, const PotentialPair& pop) {
  const Eigen::VectorXd df = extended.f - pop.f;
  const Eigen::VectorXd dg = extended.g - pop.g;
  return std::max(std::abs(df.maxCoeff() + dg.maxCoeff()), std::abs(df.minCoeff() + dg.minCoeff()));
}

Eigen::MatrixXd EtaOnGrid(const EtaBox& eta, const DiscreteMeasure& p, const DiscreteMeasure& q) {
  Eigen::MatrixXd out(p.size(), q.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < q.size(); ++j) out(i, j) = eta(p.point(i), q.point(j));
  }
  return out;
}

double CouplingIntegral(const QotProblem& problem, const PotentialPair& pot,
                        const Eigen::MatrixXd& eta) {
  const Eigen::MatrixXd h = HingeMatrix(problem, pot);
  const Eigen::VectorXd& p = problem.p_weights();
  const Eigen::VectorXd& q = problem.q_weights();
  return p.dot(h.cwiseProduct(eta) * q) / problem.epsilon();
}

struct KindSetup {
  ExperimentReport report;
  Population population;
};

KindSetup Begin(const ExperimentConfig& config, ExperimentKind kind) {
  config.Validate();
  ExperimentConfig echo = config;
  echo.kind = kind;
  KindSetup s{ExperimentReport{}, SolvePopulation(config.population, QSpec(config), config.grid,
                                                  config.epsilon, SolverOptions(config))};
  s.report.kind = kind;
  s.report.config = echo.ToJson();
  s.report.seed = config.master_seed;
  s.report.reference = s.population.cost;
  return s;
}

// Runs every (n, rep) through `body`, then sorts and summarizes the records.
void RunReplications(const ExperimentConfig& config, ExperimentReport& report,
                     const std::function<ReplicationRecord(Eigen::Index, int)>& body) {
  const std::size_t per_n = static_cast<std::size_t>(config.replications);
  const std::size_t total = per_n * config.sample_sizes.size();
  std::vector<ReplicationRecord> records(total);
  RunParallel(total, config.threads, [&](std::size_t k) {
    const Eigen::Index n = config.sample_sizes[k / per_n];
    const int rep = static_cast<int>(k % per_n);
    ReplicationRecord r = body(n, rep);
    r.n = n;
    r.rep = rep;
    records[k] = r;
  });
  for (std::size_t s = 0; s < config.sample_sizes.size(); ++s) {
    int failed = 0;
    for (std::size_t r = 0; r < per_n; ++r) failed += records[s * per_n + r].ok ? 0 : 1;
    if (failed > 0 && static_cast<double>(failed) > 0.01 * static_cast<double>(per_n)) {
      throw Error(ErrorCode::kNotConverged,
                  std::to_string(failed) + " of " + std::to_string(per_n) +
                      " replications failed to converge at n = " +
                      std::to_string(config.sample_sizes[s]));
    }
  }
  report.records = std::move(records);
}

// Per-n summary from the ok records; `raw_error` maps a record to the
// unscaled absolute error.
void Summarize(const ExperimentConfig& config, ExperimentReport& report, bool has_coverage,
               const std::function<double(const ReplicationRecord&)>& raw_error,
               bool clt_statistic) {
  const std::size_t per_n = static_cast<std::size_t>(config.replications);
  for (std::size_t s = 0; s < config.sample_sizes.size(); ++s) {
    SizeSummary sum;
    sum.n = config.sample_sizes[s];
    std::vector<double> errors, stats, vcs;
    int covered = 0;
    for (std::size_t r = 0; r < per_n; ++r) {
      const ReplicationRecord& rec = report.records[s * per_n + r];
      if (!rec.ok) {
        ++sum.failed;
        continue;
      }
      ++sum.completed;
      covered += rec.covered ? 1 : 0;
      errors.push_back(raw_error(rec));
      stats.push_back(rec.stat);
      vcs.push_back(rec.vc_stat);
      sum.normalized_errors.push_back(rec.norm_err);
    }
    if (sum.completed > 0) {
      const double c = has_coverage ? static_cast<double>(covered) / sum.completed : kNan;
      sum.coverage = c;
      sum.coverage_se = has_coverage ? std::sqrt(c * (1.0 - c) / sum.completed) : kNan;
      sum.mean_abs_error = Mean(errors);
      sum.median_abs_error = Median(errors);
      sum.median_vc = Median(vcs);
    } else {
      sum.coverage = sum.coverage_se = kNan;
      sum.mean_abs_error = sum.median_abs_error = sum.median_vc = kNan;
    }
    sum.ks = clt_statistic && sum.normalized_errors.size() >= 10 ? KsDistance(sum.normalized_errors)
                                                                 : kNan;
    if (clt_statistic && stats.size() >= 2) {
      sum.empirical_variance = SampleVariance(stats);
      sum.variance_ratio = report.theoretical_variance > 0.0
                               ? sum.empirical_variance / report.theoretical_variance
                               : kNan;
    } else {
      sum.empirical_variance = sum.variance_ratio = kNan;
    }
    report.sizes.push_back(std::move(sum));
  }
}

std::string BandText(const Band& b) {
  return "[" + FormatDouble(b.lo) + ", " + FormatDouble(b.hi) + "]";
}

void EvaluateAssertions(const ExperimentConfig& config, ExperimentReport& report) {
  const ExperimentAssertions& a = config.assertions;
  auto add = [&](std::string name, bool passed, std::string detail) {
    report.assertions.push_back({std::move(name), passed, std::move(detail)});
  };
  if (a.coverage && !report.sizes.empty()) {
    for (const SizeSummary& s : report.sizes) {
      add("coverage_n" + std::to_string(s.n), a.coverage->Contains(s.coverage),
          FormatDouble(s.coverage) + " in " + BandText(*a.coverage));
    }
  }
  if (a.ks_max && !report.sizes.empty()) {
    const double ks = report.sizes.back().ks;
    add("ks_max", ks <= *a.ks_max, FormatDouble(ks) + " <= " + FormatDouble(*a.ks_max));
  }
  if (a.slope) {
    if (report.rate) {
      add("slope", !report.rate->degenerate && a.slope->Contains(report.rate->slope),
          FormatDouble(report.rate->slope) + " in " + BandText(*a.slope));
    }
    if (report.vc_rate) {
      add("vc_slope", !report.vc_rate->degenerate && a.slope->Contains(report.vc_rate->slope),
          FormatDouble(report.vc_rate->slope) + " in " + BandText(*a.slope));
    }
  }
  if (a.variance_ratio && !report.sizes.empty()) {
    const double v = report.sizes.back().variance_ratio;
    add("variance_ratio", a.variance_ratio->Contains(v),
        FormatDouble(v) + " in " + BandText(*a.variance_ratio));
  }
  if (a.grid_bias_fraction) {
    if (!report.reference_check) {
      add("grid_bias", false, "no reference_check_grid configured");
    } else {
      const double half = NormalQuantile(0.5 * (1.0 + config.ci_level)) *
                          std::sqrt(report.theoretical_variance /
                                    static_cast<double>(config.sample_sizes.back()));
      const double gap = std::abs(report.reference - *report.reference_check);
      add("grid_bias", gap <= *a.grid_bias_fraction * half,
          FormatDouble(gap) + " <= " + FormatDouble(*a.grid_bias_fraction) + " * " +
              FormatDouble(half));
    }
  }
  if (a.monotone_median) {
    bool ok = !report.sizes.empty();
    for (std::size_t s = 1; s < report.sizes.size(); ++s) {
      ok = ok && report.sizes[s].median_abs_error < report.sizes[s - 1].median_abs_error;
    }
    add("monotone_median", ok, "median errors strictly decreasing in n");
  }
  if (a.final_below_first) {
    const bool ok = report.trajectory.size() >= 2 && report.trajectory.back() < report.trajectory.front();
    add("final_below_first", ok,
        report.trajectory.empty()
            ? std::string("empty trajectory")
            : FormatDouble(report.trajectory.back()) + " < " + FormatDouble(report.trajectory.front()));
  }
}

template <typename Fn>
ExperimentReport Timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report = fn();
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<double> JsonVector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be numeric");
    out.push_back(v.get<double>());
  }
  return out;
}

Point ToPoint(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json PointJson(const Point& p) { return std::vector<double>(p.begin(), p.end()); }

Band BandFromJson(const nlohmann::json& j, const char* what) {
  const std::vector<double> v = JsonVector(j, what);
  if (v.size() != 2 || !(v[0] <= v[1])) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be [lo, hi]");
  }
  return {v[0], v[1]};
}

void RejectUnknownKeys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown key '" + item.key() + "' in " + what);
    }
  }
}

template <typename T>
T Get(const nlohmann::json& j, const char* key, const char* expected) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("'") + key + "' must be " + expected);
  }
}

}  // namespace

std::string ExperimentKindName(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kCostClt: return "cost_clt";
    case ExperimentKind::kPotentialRate: return "potential_rate";
    case ExperimentKind::kPotentialsClt: return "potentials_clt";
    case ExperimentKind::kCouplingClt: return "coupling_clt";
    case ExperimentKind::kConsistency: return "consistency";
  }
  return "unknown";
}

DomainSpec DomainSpecFromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, {"kind", "lower", "upper", "points", "weights"}, "population");
  const std::string kind = Get<std::string>(j, "kind", "a string");
  if (kind == "uniform_box") {
    DomainSpec spec = DomainSpec::UniformBox(ToPoint(JsonVector(j.at("lower"), "lower")),
                                             ToPoint(JsonVector(j.at("upper"), "upper")));
    spec.Validate();
    return spec;
  }
  if (kind == "explicit") {
    if (!j.contains("points") || !j.at("points").is_array() || j.at("points").empty()) {
      throw Error(ErrorCode::kInvalidArgument, "explicit population needs points");
    }
    const auto& pts = j.at("points");
    const std::vector<double> w = JsonVector(j.at("weights"), "weights");
    const std::size_t dim = JsonVector(pts.at(0), "points").size();
    PointMatrix points(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::vector<double> row = JsonVector(pts.at(i), "points");
      if (row.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "ragged points");
      for (std::size_t k = 0; k < dim; ++k) {
        points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
      }
    }
    if (w.size() != pts.size()) throw Error(ErrorCode::kDimensionMismatch, "weights vs points");
    return DomainSpec::Explicit(DiscreteMeasure(points, ToPoint(w)));
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown population kind '" + kind + "'");
}

nlohmann::json DomainSpecToJson(const DomainSpec& spec) {
  nlohmann::json j;
  if (spec.kind == DomainSpec::Kind::kUniformBox) {
    j["kind"] = "uniform_box";
    j["lower"] = PointJson(spec.lower);
    j["upper"] = PointJson(spec.upper);
    return j;
  }
  j["kind"] = "explicit";
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.measure->size(); ++i) {
    pts.push_back(PointJson(spec.measure->point(i).transpose()));
  }
  j["points"] = pts;
  j["weights"] = PointJson(spec.measure->weights());
  return j;
}

void ExperimentConfig::Validate() const {
  population.Validate();
  if (population_q) {
    population_q->Validate();
    if (population_q->dim() != population.dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "population dimensions differ");
    }
  }
  if (sample_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "sample_sizes is empty");
  for (std::size_t k = 0; k < sample_sizes.size(); ++k) {
    if (sample_sizes[k] < 1) throw Error(ErrorCode::kInvalidArgument, "sample sizes must be >= 1");
    if (k > 0 && sample_sizes[k] <= sample_sizes[k - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "sample_sizes must be strictly increasing");
    }
  }
  if (replications < 2) throw Error(ErrorCode::kInvalidArgument, "replications must be >= 2");
  if (grid < 1) throw Error(ErrorCode::kInvalidArgument, "grid must be >= 1");
  if (reference_check_grid < 0) {
    throw Error(ErrorCode::kInvalidArgument, "reference_check_grid must be >= 0");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kNonpositiveEpsilon, "epsilon must be positive");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorCode::kInvalidLevel, "ci_level in (0, 1)");
  if (max_sweeps < 1) throw Error(ErrorCode::kInvalidArgument, "max_sweeps must be >= 1");
  if (threads < 0) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 0");
  if (eta) {
    const Eigen::Index d = population.dim();
    if (eta->x_lower.size() != d || eta->x_upper.size() != d || eta->y_lower.size() != d ||
        eta->y_upper.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "eta box dimension");
    }
  }
  if (kind == ExperimentKind::kCouplingClt && !eta) {
    throw Error(ErrorCode::kInvalidArgument, "coupling_clt needs eta");
  }
  if (eval_pair.first < 0 || eval_pair.second < 0) {
    throw Error(ErrorCode::kIndexOutOfRange, "eval_pair must be nonnegative");
  }
}

ExperimentConfig ExperimentConfig::FromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j,
                    {"format_version", "kind", "population", "population_q", "grid", "epsilon",
                     "sample_sizes", "replications", "master_seed", "ci_level", "eta",
                     "eval_pair", "reference_check_grid", "solver_tol", "max_sweeps", "threads",
                     "assertions"},
                    "experiment config");
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported format_version");
  }
  ExperimentConfig c;
  const std::string kind = Get<std::string>(j, "kind", "a string");
  bool known = false;
  for (ExperimentKind k : {ExperimentKind::kCostClt, ExperimentKind::kPotentialRate,
                           ExperimentKind::kPotentialsClt, ExperimentKind::kCouplingClt,
                           ExperimentKind::kConsistency}) {
    if (ExperimentKindName(k) == kind) {
      c.kind = k;
      known = true;
    }
  }
  if (!known) throw Error(ErrorCode::kInvalidArgument, "unknown experiment kind '" + kind + "'");
  if (j.contains("population")) c.population = DomainSpecFromJson(j.at("population"));
  if (j.contains("population_q")) c.population_q = DomainSpecFromJson(j.at("population_q"));
  if (j.contains("grid")) c.grid = Get<int>(j, "grid", "an integer");
  if (j.contains("epsilon")) c.epsilon = Get<double>(j, "epsilon", "a number");
  if (j.contains("sample_sizes")) {
    c.sample_sizes = Get<std::vector<Eigen::Index>>(j, "sample_sizes", "an integer array");
  }
  if (j.contains("replications")) c.replications = Get<int>(j, "replications", "an integer");
  if (j.contains("master_seed")) {
    c.master_seed = Get<std::uint64_t>(j, "master_seed", "an unsigned integer");
  }
  if (j.contains("ci_level")) c.ci_level = Get<double>(j, "ci_level", "a number");
  if (j.contains("eta")) {
    const auto& e = j.at("eta");
    RejectUnknownKeys(e, {"x_lower", "x_upper", "y_lower", "y_upper"}, "eta");
    c.eta = EtaBox{ToPoint(JsonVector(e.at("x_lower"), "x_lower")),
                   ToPoint(JsonVector(e.at("x_upper"), "x_upper")),
                   ToPoint(JsonVector(e.at("y_lower"), "y_lower")),
                   ToPoint(JsonVector(e.at("y_upper"), "y_upper"))};
  }
  if (j.contains("eval_pair")) {
    const auto v = Get<std::vector<Eigen::Index>>(j, "eval_pair", "an integer pair");
    if (v.size() != 2) throw Error(ErrorCode::kInvalidArgument, "eval_pair must have two entries");
    c.eval_pair = {v[0], v[1]};
  }
  if (j.contains("reference_check_grid")) {
    c.reference_check_grid = Get<int>(j, "reference_check_grid", "an integer");
  }
  if (j.contains("solver_tol")) c.solver_tol = Get<double>(j, "solver_tol", "a number");
  if (j.contains("max_sweeps")) c.max_sweeps = Get<int>(j, "max_sweeps", "an integer");
  if (j.contains("threads")) c.threads = Get<int>(j, "threads", "an integer");
  if (j.contains("assertions")) {
    const auto& a = j.at("assertions");
    RejectUnknownKeys(a,
                      {"coverage", "ks_max", "slope", "variance_ratio", "grid_bias_fraction",
                       "monotone_median", "final_below_first"},
                      "assertions");
    if (a.contains("coverage")) c.assertions.coverage = BandFromJson(a.at("coverage"), "coverage");
    if (a.contains("ks_max")) c.assertions.ks_max = Get<double>(a, "ks_max", "a number");
    if (a.contains("slope")) c.assertions.slope = BandFromJson(a.at("slope"), "slope");
    if (a.contains("variance_ratio")) {
      c.assertions.variance_ratio = BandFromJson(a.at("variance_ratio"), "variance_ratio");
    }
    if (a.contains("grid_bias_fraction")) {
      c.assertions.grid_bias_fraction = Get<double>(a, "grid_bias_fraction", "a number");
    }
    if (a.contains("monotone_median")) {
      c.assertions.monotone_median = Get<bool>(a, "monotone_median", "a boolean");
    }
    if (a.contains("final_below_first")) {
      c.assertions.final_below_first = Get<bool>(a, "final_below_first", "a boolean");
    }
  }
  c.Validate();
  return c;
}

nlohmann::json ExperimentConfig::ToJson() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = ExperimentKindName(kind);
  j["population"] = DomainSpecToJson(population);
  if (population_q) j["population_q"] = DomainSpecToJson(*population_q);
  j["grid"] = grid;
  j["epsilon"] = epsilon;
  j["sample_sizes"] = sample_sizes;
  j["replications"] = replications;
  j["master_seed"] = master_seed;
  j["ci_level"] = ci_level;
  if (eta) {
    j["eta"] = {{"x_lower", PointJson(eta->x_lower)},
                {"x_upper", PointJson(eta->x_upper)},
                {"y_lower", PointJson(eta->y_lower)},
                {"y_upper", PointJson(eta->y_upper)}};
  }
  j["eval_pair"] = {eval_pair.first, eval_pair.second};
  j["reference_check_grid"] = reference_check_grid;
  j["solver_tol"] = solver_tol;
  j["max_sweeps"] = max_sweeps;
  nlohmann::json a = nlohmann::json::object();
  if (assertions.coverage) a["coverage"] = {assertions.coverage->lo, assertions.coverage->hi};
  if (assertions.ks_max) a["ks_max"] = *assertions.ks_max;
  if (assertions.slope) a["slope"] = {assertions.slope->lo, assertions.slope->hi};
  if (assertions.variance_ratio) {
    a["variance_ratio"] = {assertions.variance_ratio->lo, assertions.variance_ratio->hi};
  }
  if (assertions.grid_bias_fraction) a["grid_bias_fraction"] = *assertions.grid_bias_fraction;
  if (assertions.monotone_median) a["monotone_median"] = true;
  if (assertions.final_below_first) a["final_below_first"] = true;
  j["assertions"] = a;
  return j;
}

Population SolvePopulation(const DomainSpec& p_spec, const DomainSpec& q_spec, int grid,
                           double epsilon, const AlternatingOptions& options) {
  auto atoms = [grid](const DomainSpec& spec) {
    return spec.kind == DomainSpec::Kind::kExplicit ? *spec.measure : QuadratureGrid(spec, grid);
  };
  QotProblem problem(atoms(p_spec), atoms(q_spec), epsilon);
  SolveResult res = SolveAlternating(problem, options);
  const double cost = DualObjective(problem, res.potentials);
  return {problem, std::move(res.potentials), cost};
}

ExperimentReport RunCostClt(const ExperimentConfig& config) {
  return Timed([&] {
    KindSetup s = Begin(config, ExperimentKind::kCostClt);
    ExperimentReport& report = s.report;
    const Population& pop = s.population;
    report.theoretical_variance = CostVariancePlugin(pop.problem, pop.pot);
    if (config.reference_check_grid > 0) {
      report.reference_check = SolvePopulation(config.population, QSpec(config),
                                               config.reference_check_grid, config.epsilon,
                                               SolverOptions(config))
                                   .cost;
    }
    RunReplications(config, report, [&](Eigen::Index n, int rep) {
      ReplicationRecord r;
      const auto pn = Draw(config.population, n, config.master_seed, StreamId(n, rep, kRoleX));
      const auto qn = Draw(QSpec(config), n, config.master_seed, StreamId(n, rep, kRoleY));
      const auto fit = SolveEmpirical(pn, qn, config);
      if (!fit) return r;
      r.ok = true;
      r.cost_hat = DualObjective(fit->problem, fit->pot);
      r.sigma2_hat = CostVariancePlugin(fit->problem, fit->pot);
      const ConfidenceInterval ci = CostCi(r.cost_hat, r.sigma2_hat, n, config.ci_level);
      r.covered = ci.Contains(pop.cost);
      const double root_n = std::sqrt(static_cast<double>(n));
      r.stat = root_n * (r.cost_hat - pop.cost);
      r.norm_err = Normalize(r.stat, r.sigma2_hat);
      return r;
    });
    Summarize(config, report, true,
              [&](const ReplicationRecord& r) { return std::abs(r.cost_hat - pop.cost); }, true);
    EvaluateAssertions(config, report);
    return report;
  });
}

ExperimentReport RunPotentialRate(const ExperimentConfig& config) {
  return Timed([&] {
    KindSetup s = Begin(config, ExperimentKind::kPotentialRate);
    ExperimentReport& report = s.report;
    const Population& pop = s.population;
    const Probe probe = ConstantProbe();
    RunReplications(config, report, [&](Eigen::Index n, int rep) {
      ReplicationRecord r;
      const auto pn = Draw(config.population, n, config.master_seed, StreamId(n, rep, kRoleX));
      const auto qn = Draw(QSpec(config), n, config.master_seed, StreamId(n, rep, kRoleY));
      const auto fit = SolveEmpirical(pn, qn, config);
      if (!fit) return r;
      r.ok = true;
      r.cost_hat = DualObjective(fit->problem, fit->pot);
      r.stat = SupSumError(ExtendToPopulation(*fit, pop), pop.pot);
      r.vc_stat = VcSupDeviation(pop.problem, pop.pot, qn, probe);
      return r;
    });
    Summarize(config, report, false, [](const ReplicationRecord& r) { return r.stat; }, false);
    std::vector<double> ns, med, med_vc;
    for (const SizeSummary& sz : report.sizes) {
      ns.push_back(static_cast<double>(sz.n));
      med.push_back(sz.median_abs_error);
      med_vc.push_back(sz.median_vc);
    }
    if (ns.size() >= 3) {
      report.rate = FitRate(ns, med);
      report.vc_rate = FitRate(ns, med_vc);
    }
    EvaluateAssertions(config, report);
    return report;
  });
}

ExperimentReport RunPotentialsClt(const ExperimentConfig& config) {
  return Timed([&] {
    KindSetup s = Begin(config, ExperimentKind::kPotentialsClt);
    ExperimentReport& report = s.report;
    const Population& pop = s.population;
    const auto [i0, j0] = config.eval_pair;
    if (i0 >= pop.problem.rows() || j0 >= pop.problem.cols()) {
      throw Error(ErrorCode::kIndexOutOfRange, "eval_pair outside the population grid");
    }
    const LimitLawModel model = BuildLimitLawModel(pop.problem, pop.pot);
    report.theoretical_variance = PotentialsLimitCov(model, {config.eval_pair})(0, 0);
    report.reference = pop.pot.f[i0] + pop.pot.g[j0];
    const double eps = config.epsilon;
    RunReplications(config, report, [&](Eigen::Index n, int rep) {
      ReplicationRecord r;
      const auto pn = Draw(config.population, n, config.master_seed, StreamId(n, rep, kRoleX));
      const auto qn = Draw(QSpec(config), n, config.master_seed, StreamId(n, rep, kRoleY));
      const auto fit = SolveEmpirical(pn, qn, config);
      if (!fit) return r;
      r.ok = true;
      r.cost_hat = DualObjective(fit->problem, fit->pot);
      const double fe = ExtendPotential(pop.problem.p().point(i0), qn, fit->pot.g, eps);
      const double ge = ExtendPotential(pop.problem.q().point(j0), pn, fit->pot.f, eps);
      r.stat = std::sqrt(static_cast<double>(n)) * (fe + ge - report.reference);
      r.norm_err = Normalize(r.stat, report.theoretical_variance);
      return r;
    });
    Summarize(config, report, false,
              [](const ReplicationRecord& r) {
                return std::abs(r.stat) / std::sqrt(static_cast<double>(r.n));
              },
              true);
    EvaluateAssertions(config, report);
    return report;
  });
}

ExperimentReport RunCouplingClt(const ExperimentConfig& config) {
  return Timed([&] {
    KindSetup s = Begin(config, ExperimentKind::kCouplingClt);
    ExperimentReport& report = s.report;
    const Population& pop = s.population;
    const EtaBox& eta = *config.eta;
    const Eigen::MatrixXd eta_grid = EtaOnGrid(eta, pop.problem.p(), pop.problem.q());
    const LimitLawModel model = BuildLimitLawModel(pop.problem, pop.pot);
    const double eps = config.epsilon;
    report.theoretical_variance = CouplingFunctionalVariance(model, eta_grid) / (eps * eps);
    report.reference = CouplingIntegral(pop.problem, pop.pot, eta_grid);
    RunReplications(config, report, [&](Eigen::Index n, int rep) {
      ReplicationRecord r;
      const auto pn = Draw(config.population, n, config.master_seed, StreamId(n, rep, kRoleX));
      const auto qn = Draw(QSpec(config), n, config.master_seed, StreamId(n, rep, kRoleY));
      const auto fit = SolveEmpirical(pn, qn, config);
      if (!fit) return r;
      r.ok = true;
      r.cost_hat = DualObjective(fit->problem, fit->pot);
      const double value =
          CouplingIntegral(fit->problem, fit->pot, EtaOnGrid(eta, fit->problem.p(), fit->problem.q()));
      r.stat = std::sqrt(static_cast<double>(n)) * (value - report.reference);
      r.norm_err = Normalize(r.stat, report.theoretical_variance);
      return r;
    });
    Summarize(config, report, false,
              [](const ReplicationRecord& r) {
                return std::abs(r.stat) / std::sqrt(static_cast<double>(r.n));
              },
              true);
    EvaluateAssertions(config, report);
    return report;
  });
}

ExperimentReport RunConsistency(const ExperimentConfig& config) {
  return Timed([&] {
    KindSetup s = Begin(config, ExperimentKind::kConsistency);
    ExperimentReport& report = s.report;
    const Population& pop = s.population;
    const Eigen::Index n_max = config.sample_sizes.back();
    auto full = [&](const DomainSpec& spec, std::uint64_t role) {
      return spec.kind == DomainSpec::Kind::kExplicit
                 ? SampleEmpirical(*spec.measure, n_max, config.master_seed, StreamId(0, 0, role))
                 : SampleEmpirical(spec, n_max, config.master_seed, StreamId(0, 0, role));
    };
    const DiscreteMeasure x_all = full(config.population, kRoleX);
    const DiscreteMeasure y_all = full(QSpec(config), kRoleY);
    auto prefix = [](const DiscreteMeasure& m, Eigen::Index n) {
      return DiscreteMeasure::Uniform(m.points().topRows(n)).MergeDuplicates();
    };
    for (Eigen::Index n : config.sample_sizes) {
      ReplicationRecord r;
      r.n = n;
      const auto fit = SolveEmpirical(prefix(x_all, n), prefix(y_all, n), config);
      if (!fit) {
        throw Error(ErrorCode::kNotConverged, "trajectory solve failed at n = " + std::to_string(n));
      }
      r.ok = true;
      r.cost_hat = DualObjective(fit->problem, fit->pot);
      r.stat = SupSumError(ExtendToPopulation(*fit, pop), pop.pot);
      report.trajectory.push_back(r.stat);
      report.records.push_back(r);
      SizeSummary sum;
      sum.n = n;
      sum.completed = 1;
      sum.coverage = sum.coverage_se = kNan;
      sum.mean_abs_error = sum.median_abs_error = r.stat;
      sum.median_vc = sum.ks = sum.empirical_variance = sum.variance_ratio = kNan;
      report.sizes.push_back(sum);
    }
    EvaluateAssertions(config, report);
    return report;
  });
}

ExperimentReport RunExperiment(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::kCostClt: return RunCostClt(config);
    case ExperimentKind::kPotentialRate: return RunPotentialRate(config);
    case ExperimentKind::kPotentialsClt: return RunPotentialsClt(config);
    case ExperimentKind::kCouplingClt: return RunCouplingClt(config);
    case ExperimentKind::kConsistency: return RunConsistency(config);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown experiment kind");
}

bool ExperimentReport::AllAssertionsPass() const {
  return std::all_of(assertions.begin(), assertions.end(),
                     [](const AssertionResult& a) { return a.passed; });
}

nlohmann::json ExperimentReport::ToJson(bool include_timing) const {
  auto num = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  auto rate_json = [](const RateFit& r) {
    nlohmann::json j;
    j["slope"] = r.degenerate ? nlohmann::json(nullptr) : nlohmann::json(r.slope);
    j["std_error"] = r.std_error;
    j["degenerate"] = r.degenerate;
    return j;
  };
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = ExperimentKindName(kind);
  j["seed"] = seed;
  j["config"] = config;
  j["reference"] = num(reference);
  j["theoretical_variance"] = num(theoretical_variance);
  j["reference_check"] = reference_check ? num(*reference_check) : nlohmann::json(nullptr);
  nlohmann::json sz = nlohmann::json::array();
  for (const SizeSummary& s : sizes) {
    nlohmann::json e;
    e["n"] = s.n;
    e["completed"] = s.completed;
    e["failed"] = s.failed;
    e["coverage"] = num(s.coverage);
    e["coverage_se"] = num(s.coverage_se);
    e["mean_abs_error"] = num(s.mean_abs_error);
    e["median_abs_error"] = num(s.median_abs_error);
    e["median_vc"] = num(s.median_vc);
    e["ks"] = num(s.ks);
    e["empirical_variance"] = num(s.empirical_variance);
    e["variance_ratio"] = num(s.variance_ratio);
    nlohmann::json errs = nlohmann::json::array();
    for (double v : s.normalized_errors) errs.push_back(num(v));
    e["normalized_errors"] = errs;
    sz.push_back(e);
  }
  j["sizes"] = sz;
  j["rate"] = rate ? rate_json(*rate) : nlohmann::json(nullptr);
  j["vc_rate"] = vc_rate ? rate_json(*vc_rate) : nlohmann::json(nullptr);
  nlohmann::json traj = nlohmann::json::array();
  for (double v : trajectory) traj.push_back(num(v));
  j["trajectory"] = traj;
  nlohmann::json as = nlohmann::json::array();
  for (const AssertionResult& a : assertions) {
    as.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  j["assertions"] = as;
  j["all_passed"] = AllAssertionsPass();
  if (include_timing) j["runtime_seconds"] = runtime_seconds;
  return j;
}

std::string ExperimentReport::RecordsCsv() const {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "n,rep,cost_hat,sigma2_hat,covered,norm_err\n";
  for (const ReplicationRecord& r : records) {
    if (!r.ok) continue;
    out << r.n << ',' << r.rep << ',' << FormatDouble(r.cost_hat) << ','
        << FormatDouble(r.sigma2_hat) << ',' << (r.covered ? 1 : 0) << ','
        << FormatDouble(r.norm_err) << '\n';
  }
  return out.str();
}

std::string ExperimentReport::QqCsv() const {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "n,theoretical,sample\n";
  for (const SizeSummary& s : sizes) {
    std::vector<double> v = s.normalized_errors;
    std::sort(v.begin(), v.end());
    const double count = static_cast<double>(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double t = NormalQuantile((static_cast<double>(k) + 0.5) / count);
      out << s.n << ',' << FormatDouble(t) << ',' << FormatDouble(v[k]) << '\n';
    }
  }
  return out.str();
}

std::string ExperimentReport::RateCsv() const {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "n,median_error,median_vc\n";
  for (const SizeSummary& s : sizes) {
    out << s.n << ',' << FormatDouble(s.median_abs_error) << ',' << FormatDouble(s.median_vc)
        << '\n';
  }
  return out.str();
}

}  // namespace qot
