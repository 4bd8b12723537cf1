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

#include "qot/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qot/coupling.hpp"
#include "qot/error.hpp"
#include "qot/experiments.hpp"
#include "qot/geometry.hpp"
#include "qot/io.hpp"
#include "qot/limit_law.hpp"
#include "qot/measures.hpp"
#include "qot/rng.hpp"
#include "qot/solver.hpp"

namespace qot::cli {

namespace {

using nlohmann::json;

// Raised for missing flags; the caller prints the subcommand usage.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

struct Flags {
  std::string config;
  std::string out;
  double epsilon = 0.0;
  double tol = 0.0;
  int max_sweeps = 100000;
  std::uint64_t seed = 1;
  double level = 0.95;
  int grid = 512;
  int threads = 0;

  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* max_sweeps_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* level_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void AddCommonFlags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON file with default flag values");
  f.out_opt = sub->add_option("--out", f.out, "Output directory");
  f.epsilon_opt = sub->add_option("--epsilon", f.epsilon, "Regularization strength");
  f.tol_opt = sub->add_option("--tol", f.tol, "Marginal residual tolerance");
  f.max_sweeps_opt = sub->add_option("--max-sweeps", f.max_sweeps, "Solver sweep limit");
  f.seed_opt = sub->add_option("--seed", f.seed, "Random seed");
  f.level_opt = sub->add_option("--level", f.level, "Confidence level");
  f.grid_opt = sub->add_option("--grid", f.grid, "Quadrature points per axis");
  f.threads_opt = sub->add_option("--threads", f.threads, "Worker threads (0: all cores)");
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

// Fills `target` from the config object when the flag was not given.
template <typename T>
void Merge(const json& cfg, const char* key, const CLI::Option* opt, T& target) {
  if ((opt != nullptr && opt->count() > 0) || !cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
}

bool Given(const json& cfg, const char* key, const CLI::Option* opt) {
  return (opt != nullptr && opt->count() > 0) || cfg.contains(key);
}

json LoadConfig(const Flags& f) { return f.config.empty() ? json::object() : ReadJsonFile(f.config); }

void MergeCommon(const json& cfg, Flags& f) {
  Merge(cfg, "out", f.out_opt, f.out);
  Merge(cfg, "epsilon", f.epsilon_opt, f.epsilon);
  Merge(cfg, "tol", f.tol_opt, f.tol);
  Merge(cfg, "max_sweeps", f.max_sweeps_opt, f.max_sweeps);
  Merge(cfg, "seed", f.seed_opt, f.seed);
  Merge(cfg, "level", f.level_opt, f.level);
  Merge(cfg, "grid", f.grid_opt, f.grid);
  Merge(cfg, "threads", f.threads_opt, f.threads);
}

void Require(bool present, const char* flag) {
  if (!present) throw UsageError(std::string("missing required flag ") + flag);
}

AlternatingOptions SolverOptions(const Flags& f) {
  AlternatingOptions opts;
  opts.tol = f.tol;
  opts.max_sweeps = f.max_sweeps;
  opts.record_trace = false;
  return opts;
}

std::string JoinPath(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

void WriteOutputs(const std::string& dir, const std::vector<std::pair<const char*, std::string>>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir + ": " + ec.message());
  for (const auto& [name, contents] : files) WriteFileAtomic(JoinPath(dir, name), contents);
}

std::string JsonText(const json& j) { return j.dump(2) + "\n"; }

std::string PotentialsCsv(const PotentialPair& pot) {
  std::ostringstream out;
  out << "# format_version: " << kFormatVersion << "\n";
  out << "side,index,value\n";
  for (Eigen::Index i = 0; i < pot.f.size(); ++i) out << "f," << i << ',' << FormatDouble(pot.f[i]) << '\n';
  for (Eigen::Index j = 0; j < pot.g.size(); ++j) out << "g," << j << ',' << FormatDouble(pot.g[j]) << '\n';
  return out.str();
}

PotentialPair ReadPotentialsCsv(const std::string& path, Eigen::Index n, Eigen::Index m) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  PotentialPair pot{Eigen::VectorXd::Constant(n, std::nan("")),
                    Eigen::VectorXd::Constant(m, std::nan(""))};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = SplitCsvLine(line);
    if (!header) {
      if (fields.size() != 3 || fields[0] != "side" || fields[1] != "index" || fields[2] != "value") {
        throw Error(ErrorCode::kParseError, path + ": expected header side,index,value");
      }
      header = true;
      continue;
    }
    if (fields.size() != 3) throw Error(ErrorCode::kParseError, path + ": bad row '" + line + "'");
    const double idx = ParseDouble(fields[1]);
    Eigen::VectorXd& side = fields[0] == "f" ? pot.f : pot.g;
    if (fields[0] != "f" && fields[0] != "g") throw Error(ErrorCode::kParseError, path + ": bad side");
    if (idx < 0 || idx >= static_cast<double>(side.size()) || idx != std::floor(idx)) {
      throw Error(ErrorCode::kIndexOutOfRange, path + ": index out of range");
    }
    side[static_cast<Eigen::Index>(idx)] = ParseDouble(fields[2]);
  }
  if (!pot.f.allFinite() || !pot.g.allFinite()) {
    throw Error(ErrorCode::kParseError, path + ": potentials incomplete for this instance");
  }
  return pot;
}

json SolveSummary(const QotProblem& problem, const PotentialPair& pot, const SolveReport& report) {
  const SparseCoupling coupling = PrimalFromDual(problem, pot);
  json j;
  j["format_version"] = kFormatVersion;
  j["n"] = problem.rows();
  j["m"] = problem.cols();
  j["epsilon"] = problem.epsilon();
  j["converged"] = report.converged;
  j["sweeps"] = report.iterations;
  j["cost"] = PrimalObjective(problem, coupling);
  j["dual_value"] = DualObjective(problem, pot);
  try {
    j["gap"] = DualityGap(problem, pot);
  } catch (const Error&) {
    j["gap"] = nullptr;
  }
  j["residual"] = MarginalResiduals(problem, pot).SupNorm();
  j["marginal_defect"] = MarginalDefect(problem, coupling);
  j["fill_ratio"] = ComputeSupportStats(coupling).fill_ratio;
  return j;
}

int CmdSolve(Flags& f, const std::string& p_flag, const std::string& q_flag,
             const std::string& warm_flag, const CLI::App& sub) {
  const json cfg = LoadConfig(f);
  MergeCommon(cfg, f);
  std::string p_path = p_flag, q_path = q_flag, warm = warm_flag;
  Merge(cfg, "p", sub.get_option("--p"), p_path);
  Merge(cfg, "q", sub.get_option("--q"), q_path);
  Merge(cfg, "warm_start", sub.get_option("--warm-start"), warm);
  Require(!p_path.empty(), "--p");
  Require(!q_path.empty(), "--q");
  Require(Given(cfg, "epsilon", f.epsilon_opt), "--epsilon");
  Require(!f.out.empty(), "--out");

  const QotProblem problem(ReadMeasureCsv(p_path), ReadMeasureCsv(q_path), f.epsilon);
  std::optional<PotentialPair> start;
  if (!warm.empty()) start = ReadPotentialsCsv(warm, problem.rows(), problem.cols());

  PotentialPair pot;
  SolveReport report;
  int code = kExitOk;
  try {
    SolveResult res = SolveAlternating(problem, SolverOptions(f), start);
    pot = std::move(res.potentials);
    report = std::move(res.report);
  } catch (const NotConverged& e) {
    pot = e.best();
    report = e.report();
    code = kExitNotConverged;
  }
  std::ostringstream coupling_csv;
  WriteCouplingCsv(coupling_csv, problem, PrimalFromDual(problem, pot));
  WriteOutputs(f.out, {{"potentials.csv", PotentialsCsv(pot)},
                       {"coupling.csv", coupling_csv.str()},
                       {"summary.json", JsonText(SolveSummary(problem, pot, report))}});
  return code;
}

int CmdCi(Flags& f, const std::string& x_flag, const std::string& y_flag, const CLI::App& sub) {
  const json cfg = LoadConfig(f);
  MergeCommon(cfg, f);
  std::string x_path = x_flag, y_path = y_flag;
  Merge(cfg, "x", sub.get_option("--x"), x_path);
  Merge(cfg, "y", sub.get_option("--y"), y_path);
  Require(!x_path.empty(), "--x");
  Require(!y_path.empty(), "--y");
  Require(Given(cfg, "epsilon", f.epsilon_opt), "--epsilon");
  Require(!f.out.empty(), "--out");
  if (!(f.level > 0.0 && f.level < 1.0)) throw Error(ErrorCode::kInvalidLevel, "--level must lie in (0, 1)");

  const DiscreteMeasure x = ReadMeasureCsv(x_path);
  const DiscreteMeasure y = ReadMeasureCsv(y_path);
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "samples must have the same number of rows");
  }
  const QotProblem problem(x, y, f.epsilon);
  const SolveResult res = SolveAlternating(problem, SolverOptions(f));
  const double cost_hat = DualObjective(problem, res.potentials);
  const double sigma2 = CostVariancePlugin(problem, res.potentials);
  const ConfidenceInterval ci = CostCi(cost_hat, sigma2, x.size(), f.level);
  json j;
  j["format_version"] = kFormatVersion;
  j["n"] = ci.n;
  j["epsilon"] = f.epsilon;
  j["level"] = ci.level;
  j["cost_hat"] = cost_hat;
  j["sigma2_hat"] = sigma2;
  j["half_width"] = ci.half_width;
  j["interval"] = {ci.lower(), ci.upper()};
  WriteOutputs(f.out, {{"ci.json", JsonText(j)}});
  return kExitOk;
}

int CmdCltSim(Flags& f, std::ostream& out) {
  Require(!f.config.empty(), "--config");
  const json cfg = ReadJsonFile(f.config);
  json experiment = cfg;
  // The output directory may ride along in the config; it is not an
  // experiment parameter.
  if (experiment.is_object() && experiment.contains("out")) {
    if (f.out_opt->count() == 0) Merge(cfg, "out", nullptr, f.out);
    experiment.erase("out");
  }
  Require(!f.out.empty(), "--out");
  ExperimentConfig config = ExperimentConfig::FromJson(experiment);
  if (f.seed_opt->count()) config.master_seed = f.seed;
  if (f.level_opt->count()) config.ci_level = f.level;
  if (f.grid_opt->count()) config.grid = f.grid;
  if (f.epsilon_opt->count()) config.epsilon = f.epsilon;
  if (f.tol_opt->count()) config.solver_tol = f.tol;
  if (f.max_sweeps_opt->count()) config.max_sweeps = f.max_sweeps;
  if (f.threads_opt->count()) config.threads = f.threads;
  config.Validate();

  const ExperimentReport report = RunExperiment(config);
  WriteOutputs(f.out, {{"report.json", JsonText(report.ToJson())},
                       {"replications.csv", report.RecordsCsv()},
                       {"qq.csv", report.QqCsv()},
                       {"rate.csv", report.RateCsv()}});
  for (const AssertionResult& a : report.assertions) {
    out << (a.passed ? "ok   " : "FAIL ") << a.name << ": " << a.detail << "\n";
  }
  return report.AllAssertionsPass() ? kExitOk : kExitAssertionFailed;
}

// sup over the fine grid of |(f_c + g_c) - (f + g)| with the coarse
// potentials extended to the fine atoms.
double PotentialGap(const Population& fine, const Population& coarse) {
  const double eps = fine.problem.epsilon();
  double lo = 0.0, hi = 0.0;
  Eigen::VectorXd df(fine.problem.rows()), dg(fine.problem.cols());
  for (Eigen::Index i = 0; i < df.size(); ++i) {
    df[i] = ExtendPotential(fine.problem.p().point(i), coarse.problem.q(), coarse.pot.g, eps) - fine.pot.f[i];
  }
  for (Eigen::Index j = 0; j < dg.size(); ++j) {
    dg[j] = ExtendPotential(fine.problem.q().point(j), coarse.problem.p(), coarse.pot.f, eps) - fine.pot.g[j];
  }
  if (df.size() > 0 && dg.size() > 0) {
    hi = df.maxCoeff() + dg.maxCoeff();
    lo = df.minCoeff() + dg.minCoeff();
  }
  return std::max(std::abs(hi), std::abs(lo));
}

struct DiagnoseInputs {
  std::string p_path, q_path, population;
  int compare_grid = 0;
  Eigen::Index n = 0;
  std::vector<double> betas{0.0, 0.0125, 0.025, 0.05, 0.1};
};

int CmdDiagnose(Flags& f, DiagnoseInputs in, const CLI::App& sub) {
  const json cfg = LoadConfig(f);
  MergeCommon(cfg, f);
  Merge(cfg, "p", sub.get_option("--p"), in.p_path);
  Merge(cfg, "q", sub.get_option("--q"), in.q_path);
  Merge(cfg, "population", sub.get_option("--population"), in.population);
  Merge(cfg, "compare_grid", sub.get_option("--compare-grid"), in.compare_grid);
  Merge(cfg, "n", sub.get_option("--n"), in.n);
  Merge(cfg, "betas", sub.get_option("--betas"), in.betas);
  const bool from_files = !in.p_path.empty() || !in.q_path.empty();
  if (from_files == !in.population.empty()) {
    throw UsageError("give either --p and --q or --population");
  }
  if (from_files) {
    Require(!in.p_path.empty(), "--p");
    Require(!in.q_path.empty(), "--q");
  }
  Require(Given(cfg, "epsilon", f.epsilon_opt), "--epsilon");
  Require(!f.out.empty(), "--out");
  if (in.compare_grid < 0 || in.n < 0) throw Error(ErrorCode::kInvalidArgument, "negative size");
  if (in.compare_grid > 0 && from_files) {
    throw Error(ErrorCode::kInvalidArgument, "--compare-grid needs --population");
  }

  std::optional<DomainSpec> spec;
  if (!from_files) spec = DomainSpecFromJson(ReadJsonFile(in.population));
  const Population pop =
      from_files ? [&] {
        QotProblem problem(ReadMeasureCsv(in.p_path), ReadMeasureCsv(in.q_path), f.epsilon);
        SolveResult res = SolveAlternating(problem, SolverOptions(f));
        const double cost = DualObjective(problem, res.potentials);
        return Population{problem, std::move(res.potentials), cost};
      }()
                 : SolvePopulation(*spec, *spec, f.grid, f.epsilon, SolverOptions(f));

  const ConvexPotentials convex = ToConvexForm(pop.pot, pop.problem.p().points(), pop.problem.q().points());
  std::vector<DiagnosticRow> rows;
  rows.push_back({"cost", "", pop.cost});
  rows.push_back({"fill_ratio", "", ComputeSupportStats(PrimalFromDual(pop.problem, pop.pot)).fill_ratio});
  rows.push_back({"min_section_mass", "", MinSectionMass(pop.problem, convex)});
  std::string beta_text;
  for (double b : in.betas) beta_text += (beta_text.empty() ? "" : ";") + FormatDouble(b);
  rows.push_back({"lipschitz_beta", "betas=" + beta_text,
                  LipschitzBetaDiagnostic(pop.problem, convex, in.betas, {ConstantProbe()})});
  const GradientLipschitz gl = GradientLipschitzDiagnostic(pop.problem, convex);
  rows.push_back({"gradient_lipschitz", "gradient", gl.gradient});
  rows.push_back({"gradient_lipschitz", "section_mass", gl.mass});
  if (in.n > 0) {
    const DiscreteMeasure qn = spec ? SampleEmpirical(*spec, in.n, f.seed, StreamId(in.n, 0, 1))
                                    : SampleEmpirical(pop.problem.q(), in.n, f.seed, StreamId(in.n, 0, 1));
    rows.push_back({"vc_sup_deviation", "n=" + std::to_string(in.n),
                    VcSupDeviation(pop.problem, pop.pot, qn, ConstantProbe())});
  }
  if (in.compare_grid > 0) {
    const Population other = SolvePopulation(*spec, *spec, in.compare_grid, f.epsilon, SolverOptions(f));
    const std::string tag = "m" + std::to_string(in.compare_grid) + "_m" + std::to_string(f.grid);
    rows.push_back({"stability_cost_gap", tag, std::abs(other.cost - pop.cost)});
    rows.push_back({"stability_potential_gap", tag,
                    f.grid >= in.compare_grid ? PotentialGap(pop, other) : PotentialGap(other, pop)});
    const ConvexPotentials other_convex =
        ToConvexForm(other.pot, other.problem.p().points(), other.problem.q().points());
    rows.push_back({"stability_min_section_mass_gap", tag,
                    std::abs(MinSectionMass(other.problem, other_convex) - rows[2].value)});
  }
  std::ostringstream csv;
  WriteDiagnosticsCsv(csv, rows);
  WriteOutputs(f.out, {{"diagnostics.csv", csv.str()}});
  return kExitOk;
}

int CmdSample(Flags& f, Eigen::Index n, std::vector<double> lower, std::vector<double> upper,
              const CLI::App& sub) {
  const json cfg = LoadConfig(f);
  MergeCommon(cfg, f);
  Merge(cfg, "n", sub.get_option("--n"), n);
  Merge(cfg, "lower", sub.get_option("--lower"), lower);
  Merge(cfg, "upper", sub.get_option("--upper"), upper);
  Require(n > 0, "--n");
  Require(!f.out.empty(), "--out");
  auto to_point = [](const std::vector<double>& v) {
    return Point(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  const DomainSpec spec = DomainSpec::UniformBox(to_point(lower), to_point(upper));
  spec.Validate();
  std::ostringstream x, y;
  WriteMeasureCsv(x, SampleEmpirical(spec, n, f.seed, StreamId(n, 0, 0)));
  WriteMeasureCsv(y, SampleEmpirical(spec, n, f.seed, StreamId(n, 0, 1)));
  WriteOutputs(f.out, {{"x.csv", x.str()}, {"y.csv", y.str()}});
  return kExitOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quadratically regularized optimal transport: solver, inference and experiments",
               "qot"};
  app.require_subcommand(1);

  Flags solve_f, ci_f, sim_f, diag_f, sample_f;
  std::string p_path, q_path, warm, x_path, y_path;
  DiagnoseInputs diag_in;
  Eigen::Index sample_n = 0;
  std::vector<double> lower{0.0}, upper{1.0};

  CLI::App* solve = app.add_subcommand("solve", "Solve one instance from two measure CSVs");
  AddCommonFlags(solve, solve_f);
  solve->add_option("--p", p_path, "Source measure CSV");
  solve->add_option("--q", q_path, "Target measure CSV");
  solve->add_option("--warm-start", warm, "potentials.csv to start from");

  CLI::App* ci = app.add_subcommand("ci", "Confidence interval for the cost from two samples");
  AddCommonFlags(ci, ci_f);
  ci->add_option("--x", x_path, "Sample from P (CSV)");
  ci->add_option("--y", y_path, "Sample from Q (CSV)");

  CLI::App* sim = app.add_subcommand("clt-sim", "Run a Monte Carlo experiment from a JSON config");
  AddCommonFlags(sim, sim_f);

  CLI::App* diag = app.add_subcommand("diagnose", "Section geometry and stability diagnostics");
  AddCommonFlags(diag, diag_f);
  diag->add_option("--p", diag_in.p_path, "Source measure CSV");
  diag->add_option("--q", diag_in.q_path, "Target measure CSV");
  diag->add_option("--population", diag_in.population, "Population JSON (uniform box or explicit)");
  diag->add_option("--compare-grid", diag_in.compare_grid, "Second grid resolution for stability");
  diag->add_option("--n", diag_in.n, "Sample size for the sup-deviation statistic");
  diag->add_option("--betas", diag_in.betas, "Thickening grid")->delimiter(',');

  CLI::App* sample = app.add_subcommand("sample", "Draw x.csv and y.csv from a uniform box");
  AddCommonFlags(sample, sample_f);
  sample->add_option("--n", sample_n, "Sample size");
  sample->add_option("--lower", lower, "Box lower corner")->delimiter(',');
  sample->add_option("--upper", upper, "Box upper corner")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "qot: " << e.what() << "\n\n" << app.help();
    return kExitInputError;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == solve) return CmdSolve(solve_f, p_path, q_path, warm, *solve);
    if (active == ci) return CmdCi(ci_f, x_path, y_path, *ci);
    if (active == sim) return CmdCltSim(sim_f, out);
    if (active == diag) return CmdDiagnose(diag_f, diag_in, *diag);
    return CmdSample(sample_f, sample_n, lower, upper, *sample);
  } catch (const UsageError& e) {
    err << "qot " << active->get_name() << ": " << e.what() << "\n\n" << active->help();
    return kExitInputError;
  } catch (const NotConverged& e) {
    err << "qot " << active->get_name() << ": " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const Error& e) {
    err << "qot " << active->get_name() << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kNotConverged ? kExitNotConverged : kExitInputError;
  } catch (const std::exception& e) {
    err << "qot " << active->get_name() << ": " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace qot::cli
