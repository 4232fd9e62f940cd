#include <benchmark/benchmark.h>

#include "cerebloop/cerebellum.hpp"
#include "cerebloop/engine.hpp"
#include "cerebloop/oracle.hpp"
#include "cerebloop/plant.hpp"
#include "cerebloop/session.hpp"

using namespace cerebloop;

namespace {

/// One simulated second of the default cerebellum under open-loop input.
void run_cerebellum_second(benchmark::State& state, NumericMode mode, bool learning) {
  const auto cfg = SessionConfig::standard();
  const auto cb = build_network(cfg.cerebellum);
  const auto inputs = open_loop_inputs(cfg, cb.network, cb.layout, 1.0);
  std::size_t spikes = 0;
  for (auto _ : state) {
    Engine e(cb.network, {mode, 1.0, learning});
    spikes += run_for(e, inputs, 1000).size();
  }
  state.counters["ticks/s"] = benchmark::Counter(1000.0 * static_cast<double>(state.iterations()),
                                                 benchmark::Counter::kIsRate);
  state.counters["spikes"] = static_cast<double>(spikes) / static_cast<double>(state.iterations());
}

void BM_CerebellumFloat(benchmark::State& state) { run_cerebellum_second(state, NumericMode::float64(), true); }
void BM_CerebellumFixed(benchmark::State& state) { run_cerebellum_second(state, NumericMode::fixed_point(), true); }
void BM_CerebellumFrozen(benchmark::State& state) { run_cerebellum_second(state, NumericMode::float64(), false); }

void BM_OracleCerebellumSecond(benchmark::State& state) {
  const auto cfg = SessionConfig::standard();
  const auto cb = build_network(cfg.cerebellum);
  const auto inputs = open_loop_inputs(cfg, cb.network, cb.layout, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(event_driven_run(cb.network, inputs, 1000.0 - 1e-9));
}

void BM_PlantStep(benchmark::State& state) {
  const PlantParams p;
  auto s = pretensioned_state(2.0, p);
  for (auto _ : state) {
    s = plant_step(s, 0.3, 0.4, p, 2.0);
    benchmark::DoNotOptimize(s);
  }
}

/// Closed loop, one 50 ms telemetry frame per iteration.
void BM_SessionFrame(benchmark::State& state) {
  auto cfg = SessionConfig::standard();
  cfg.duration_s = 1e6;
  Session s(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(s.step_frame());
  state.counters["sim_s/s"] = benchmark::Counter(0.05 * static_cast<double>(state.iterations()),
                                                 benchmark::Counter::kIsRate);
}

}  // namespace

BENCHMARK(BM_CerebellumFloat)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CerebellumFixed)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CerebellumFrozen)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OracleCerebellumSecond)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PlantStep);
BENCHMARK(BM_SessionFrame)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
