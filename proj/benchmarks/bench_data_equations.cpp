#include <benchmark/benchmark.h>

#include <lpvssid/data_equations.hpp>
#include <lpvssid/rng.hpp>
#include <lpvssid/simulation.hpp>

using namespace lpvssid;

namespace {

struct Fixture {
  Benchmark bench = make_benchmark(7);
  DataSet data;
  SchedulingSamples s;

  explicit Fixture(Index N) {
    NoiseSpec noise;
    noise.target_snr_db = 25.0;
    data = make_dataset(bench.model, bench.basis, N, noise, 1);
    s = eval_scheduling(bench.basis, data.p);
  }
};

void BM_past_regressor_column(benchmark::State& state) {
  static Fixture fx(2000);
  const int p_win = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_past_regressor(
        fx.data.u, *fx.data.xi, fx.s, 1000, p_win, Mode::open_loop));
  }
}
BENCHMARK(BM_past_regressor_column)->Arg(2)->Arg(3)->Arg(4);

void BM_corrected_future_open(benchmark::State& state) {
  static Fixture fx(2000);
  WindowConfig win;
  win.f = 2;
  win.p_win = static_cast<int>(state.range(0));
  const HankelEstimate h = markov_to_hankel(
      true_markov_coeffs(fx.bench.model, fx.bench.basis,
                         win.f + win.p_win - 1, Mode::open_loop),
      win);
  for (auto _ : state) {
    benchmark::DoNotOptimize(corrected_future(fx.data, fx.s, h));
  }
  state.SetItemsProcessed(state.iterations() * fx.data.N());
}
BENCHMARK(BM_corrected_future_open)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_corrected_future_closed(benchmark::State& state) {
  static Fixture fx(2000);
  WindowConfig win;
  win.f = 1;
  win.p_win = static_cast<int>(state.range(0));
  const HankelEstimate h = markov_to_hankel(
      true_markov_coeffs(fx.bench.model, fx.bench.basis,
                         win.f + win.p_win - 1, Mode::closed_loop),
      win);
  for (auto _ : state) {
    benchmark::DoNotOptimize(corrected_future(fx.data, fx.s, h));
  }
  state.SetItemsProcessed(state.iterations() * fx.data.N());
}
BENCHMARK(BM_corrected_future_closed)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_oracle_evaluate(benchmark::State& state) {
  static Fixture fx(500);
  WindowConfig win;
  win.f = 3;
  win.p_win = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle_evaluate(fx.bench.model, fx.data, fx.s,
                                             win, Mode::open_loop, true));
  }
}
BENCHMARK(BM_oracle_evaluate)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
