// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "itl/env_gen.hpp"
#include "itl/experiment.hpp"
#include "itl/kernels.hpp"

using namespace itl;

namespace {

TabularMdp sized_env(std::size_t n_decision_states, std::size_t n_actions) {
    EnvSpec spec;
    spec.n_decision_states = n_decision_states;
    spec.n_actions = n_actions;
    spec.seed = 1;
    return generate_env(spec);
}

std::vector<double> some_values(std::size_t n) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(gen);
    v.back() = 0.0;
    return v;
}

void BM_BellmanSerial(benchmark::State& state) {
    const auto mdp = sized_env(static_cast<std::size_t>(state.range(0)), 6);
    const auto v = some_values(mdp.n_states());
    QTable q(mdp.n_states(), mdp.n_actions());
    for (auto _ : state) {
        kernels::bellman_backup_serial(mdp, v, q);
        benchmark::DoNotOptimize(q.data().data());
    }
}

void BM_BellmanParallel(benchmark::State& state) {
    const auto mdp = sized_env(static_cast<std::size_t>(state.range(0)), 6);
    const auto v = some_values(mdp.n_states());
    QTable q(mdp.n_states(), mdp.n_actions());
    for (auto _ : state) {
        kernels::bellman_backup_parallel(mdp, v, q);
        benchmark::DoNotOptimize(q.data().data());
    }
}

// one reduced experiment; range(0) is the job count (1 runs the serial map)
void BM_DatasetMap(benchmark::State& state) {
    const auto mdp = reference_env();
    ExperimentConfig c;
    c.epsilons = {3.0};
    c.episode_counts = {15};
    c.n_datasets = 8;
    c.n_posterior_samples = 10;
    for (auto _ : state) {
        auto report = run_experiment(c, mdp, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(report.total_datasets);
    }
}

} // namespace

BENCHMARK(BM_BellmanSerial)->Arg(15)->Arg(200)->Arg(800);
BENCHMARK(BM_BellmanParallel)->Arg(15)->Arg(200)->Arg(800);
BENCHMARK(BM_DatasetMap)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
