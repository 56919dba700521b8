// Serial reference vs OpenMP path for the per-query kernels and a full curation pass.
#include <benchmark/benchmark.h>

#include "autocode/config.hpp"
#include "autocode/curation.hpp"
#include "autocode/env.hpp"
#include "autocode/kernels.hpp"
#include "autocode/policy.hpp"

using namespace autocode;

namespace {

struct Fixture {
  std::vector<env::SynthQuerySpec> suite;
  policy::PolicyParams policy;

  explicit Fixture(int n) : suite(env::generate_suite(1, n, env::Profile::balanced)) {
    policy = policy::uniform_policy(policy::make_layout(suite));
  }
};

kernels::ExecPolicy exec_for(const benchmark::State& state) {
  return state.range(1) ? kernels::ExecPolicy::parallel() : kernels::ExecPolicy::serial();
}

void bm_exact_q_table(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const auto ex = exec_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::exact_q_table(f.suite, f.policy, ex));
}

void bm_sampled_q_table(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const auto ex = exec_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::sampled_q_table(f.suite, f.policy, 64, 3, ex));
}

void bm_curate(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  const auto ex = exec_for(state);
  Config cfg;
  for (auto _ : state) benchmark::DoNotOptimize(curation::curate(f.suite, f.policy, cfg, 0, ex));
}

}  // namespace

// Second argument: 0 = serial reference, 1 = OpenMP.
BENCHMARK(bm_exact_q_table)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sampled_q_table)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(bm_curate)->ArgsProduct({{200, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
