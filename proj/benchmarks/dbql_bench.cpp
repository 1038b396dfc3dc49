#include <benchmark/benchmark.h>

#include <vector>

#include "dbql/multiagent.hpp"
#include "dbql/planner.hpp"
#include "dbql/policies.hpp"

namespace {

using namespace dbql;

void BM_SoftmaxWeights(benchmark::State& state) {
  std::vector<double> mu(100), out(100);
  Rng rng(1);
  for (double& x : mu) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(softmax_weights(mu, 3.0, out));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SoftmaxWeights);

void BM_SoftmaxWeightsExcluded(benchmark::State& state) {
  std::vector<double> mu(100), out(100);
  std::vector<std::uint8_t> taken(100, 0);
  Rng rng(2);
  for (double& x : mu) x = rng.uniform();
  for (std::size_t i = 0; i < 100; i += 2) taken[i] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(softmax_weights(mu, 3.0, out, taken));
}
BENCHMARK(BM_SoftmaxWeightsExcluded);

void BM_ValueIteration(benchmark::State& state) {
  const GridSpec grid;
  for (auto _ : state) benchmark::DoNotOptimize(value_iteration(grid, 0.9, 1e-10));
}
BENCHMARK(BM_ValueIteration);

// One synchronous step of N agents; the range argument is N.
void BM_MultiAgentStep(benchmark::State& state, Mode mode) {
  const GridSpec grid;
  const CompiledDynamics dyn(grid);
  const auto n = static_cast<std::size_t>(state.range(0));
  QTable q(grid.num_states());
  std::vector<AgentBanditState> agents(n, AgentBanditState(grid.num_pairs()));
  auto streams = TrialStreams::derive(7, n);
  for (auto _ : state) {
    auto round = multi_agent_step(q, agents, dyn, mode, 0.9, {0.02, 3.0}, streams);
    benchmark::DoNotOptimize(round.valid_count);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK_CAPTURE(BM_MultiAgentStep, bandit_conflict, Mode{SelectionPolicy::Bandit, ConflictMode::Allowed})
    ->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_MultiAgentStep, bandit_free, Mode{SelectionPolicy::Bandit, ConflictMode::Free})
    ->Arg(10)->Arg(100);
BENCHMARK_CAPTURE(BM_MultiAgentStep, uniform_free, Mode{SelectionPolicy::UniformRandom, ConflictMode::Free})
    ->Arg(10)->Arg(100);

void BM_Trial(benchmark::State& state) {
  TrialSpec spec;
  spec.n_agents = static_cast<std::uint32_t>(state.range(0));
  spec.schedules.horizon = 1000;
  const auto ref = value_iteration(spec.grid, spec.gamma).values;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(spec, ref, seed++).loss.back());
}
BENCHMARK(BM_Trial)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
