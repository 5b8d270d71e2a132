#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <vector>

#include "actauth/evaluation.hpp"
#include "actauth/kernels.hpp"
#include "actauth/synth.hpp"

using namespace actauth;

namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Point2> out(n);
  for (auto& p : out) p = {g(rng), g(rng)};
  return out;
}

template <auto Kernel>
void bm_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto points = random_points(n, 1);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(points, 0.5, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}

template <auto Kernel>
void bm_decisions(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto support = random_points(n, 2);
  auto probes = random_points(4 * n, 3);
  std::vector<double> coef(n, 0.1), out(probes.size());
  for (auto _ : state) {
    Kernel(support, coef, 0.5, 0.0, probes, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * probes.size()));
}

const std::map<std::string, std::vector<RawEvent>>& bench_users() {
  static const auto users = [] {
    synth::SynthConfig sc;
    sc.n_users = 6;
    sc.active_hours = 24;
    sc.seed = 3;
    auto pop = synth::generate_population(sc);
    std::map<std::string, std::vector<RawEvent>> out;
    for (std::size_t u = 0; u < pop.users.size(); ++u) out[pop.users[u].user_id] = pop.events[u];
    return out;
  }();
  return users;
}

void bm_evaluate(benchmark::State& state) {
  eval::EvalConfig c;
  c.windows = {300, 1800};
  c.trace_windows = {};
  c.jobs = static_cast<int>(state.range(0));
  c.reference_windows = state.range(1) != 0;
  const auto& users = bench_users();
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate(users, c));
}

}  // namespace

BENCHMARK(bm_gram<kernels::rbf_gram_serial>)->Arg(256)->Arg(1024);
BENCHMARK(bm_gram<kernels::rbf_gram_parallel>)->Arg(256)->Arg(1024);
BENCHMARK(bm_decisions<kernels::decision_values_serial>)->Arg(256)->Arg(1024);
BENCHMARK(bm_decisions<kernels::decision_values_parallel>)->Arg(256)->Arg(1024);
// Args: jobs (0 = OpenMP default), reference window scoring.
BENCHMARK(bm_evaluate)->Args({1, 1})->Args({1, 0})->Args({0, 0})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
