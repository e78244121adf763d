#include <benchmark/benchmark.h>

#include <lpvssid/realization.hpp>
#include <lpvssid/simulation.hpp>
#include <lpvssid/ss_estimation.hpp>

using namespace lpvssid;

namespace {

void BM_identify(benchmark::State& state, Method method) {
  const Benchmark bench = make_benchmark(7);
  NoiseSpec noise;
  noise.target_snr_db = 25.0;
  const DataSet data =
      make_dataset(bench.model, bench.basis, state.range(0), noise, 1);

  IdentifyConfig cfg;
  cfg.method = method;
  cfg.n_x = 2;
  if (method_is_open_loop(method)) {
    cfg.win.f = 2;
    cfg.win.p_win = 3;
  } else {
    cfg.win.f = 1;
    cfg.win.p_win = 3;
    cfg.efficient_pbsid = true;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(identify(data, bench.basis, cfg));
  }
}

void BM_constrained_svd(benchmark::State& state) {
  const Benchmark bench = make_benchmark(7);
  NoiseSpec noise;
  noise.target_snr_db = 10.0;
  const DataSet data =
      make_dataset(bench.model, bench.basis, state.range(0), noise, 1);
  IdentifyConfig cfg;
  cfg.method = Method::ssarx;
  cfg.win.f = 1;
  cfg.win.p_win = 3;
  const PipelinePrep prep = prepare_pipeline(data, bench.basis, false, cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(constrained_svd(prep.sdm.Ycorr, prep.sdm.Z));
  }
}

} // namespace

BENCHMARK_CAPTURE(BM_identify, cca_ol, Method::cca_ol)
    ->Arg(2000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_identify, ssarx, Method::ssarx)
    ->Arg(2000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_identify, pbsid, Method::pbsid)
    ->Arg(2000)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_constrained_svd)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
