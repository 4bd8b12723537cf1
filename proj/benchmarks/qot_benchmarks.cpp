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

#include <benchmark/benchmark.h>

#include "qot/experiments.hpp"
#include "qot/limit_law.hpp"
#include "qot/measures.hpp"
#include "qot/rng.hpp"
#include "qot/solver.hpp"

namespace qot {
namespace {

QotProblem UniformSample(Eigen::Index n, double eps) {
  const DiscreteMeasure x = SampleEmpirical(DomainSpec::UnitInterval(), n, 1, 0);
  const DiscreteMeasure y = SampleEmpirical(DomainSpec::UnitInterval(), n, 1, 1);
  return QotProblem(x, y, eps);
}

void BM_CoordinateUpdateRow(benchmark::State& state) {
  const Eigen::Index m = state.range(0);
  CounterRng rng(3, 0);
  Eigen::VectorXd g(m), c(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    g[j] = rng.Normal();
    c[j] = rng.Uniform();
  }
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (auto _ : state) benchmark::DoNotOptimize(CoordinateUpdateRow(g, q, c, 0.1));
}
BENCHMARK(BM_CoordinateUpdateRow)->RangeMultiplier(4)->Range(64, 4096);

void BM_SolveAlternating(benchmark::State& state) {
  const QotProblem problem = UniformSample(state.range(0), state.range(1) / 100.0);
  AlternatingOptions opts;
  opts.record_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(SolveAlternating(problem, opts));
}
BENCHMARK(BM_SolveAlternating)->Args({200, 50})->Args({200, 5})->Args({1600, 50})->Unit(benchmark::kMillisecond);

void BM_BuildLimitLawModel(benchmark::State& state) {
  const Population pop =
      SolvePopulation(DomainSpec::UnitInterval(), DomainSpec::UnitInterval(), static_cast<int>(state.range(0)), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(BuildLimitLawModel(pop.problem, pop.pot));
}
BENCHMARK(BM_BuildLimitLawModel)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_CostVariancePlugin(benchmark::State& state) {
  const QotProblem problem = UniformSample(state.range(0), 0.5);
  const PotentialPair pot = SolveAlternating(problem).potentials;
  for (auto _ : state) benchmark::DoNotOptimize(CostVariancePlugin(problem, pot));
}
BENCHMARK(BM_CostVariancePlugin)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace qot

BENCHMARK_MAIN();
