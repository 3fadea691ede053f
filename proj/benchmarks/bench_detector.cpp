#include <benchmark/benchmark.h>

#include "isac/detector.hpp"
#include "isac/harness.hpp"
#include "isac/selfcheck.hpp"

namespace {

using namespace isac;

struct Fixture {
  SystemConfig cfg;
  GridSpec spec;
  DftCodebook cb;
  RxReductionPlan plan;
  std::vector<OfdmFrame> frames;
  TxBeam beam;
  RxBlocks rx;
  DetectionGrid grid;

  explicit Fixture(int n_a) {
    cfg.N_a = n_a;
    Rng rng(1);
    cb = build_codebook(n_a, 0.1, 6);
    plan = draw_reduction_plan(cb, cfg.B, cfg.N_rf, rng);
    frames = generate_frames(cfg, rng);
    beam = design_tx_beam(std::asin(0.1), 7.0, n_a);
    rx = simulate_epoch_rx({}, frames, beam, plan, cfg, 0.0, rng);
    grid = make_grid(cfg, spec, cb);
  }
};

void BM_GlrtFast(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  GlrtEngine engine(f.cfg, f.spec);
  for (auto _ : state) {
    engine.evaluate(f.rx, f.frames, f.plan, f.beam, f.grid);
    benchmark::DoNotOptimize(f.grid.stat.data());
  }
  state.counters["cells"] = static_cast<double>(f.grid.cells());
}
BENCHMARK(BM_GlrtFast)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_GlrtOracleCell(benchmark::State& state) {
  Fixture f(32);
  for (auto _ : state) {
    auto v = glrt_statistic_oracle(f.rx, f.frames, f.plan, f.beam, f.cfg, f.grid.doppler[3],
                                   f.grid.delay[5], f.grid.angle(7));
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_GlrtOracleCell)->Unit(benchmark::kMicrosecond);

void BM_OsCfar(benchmark::State& state) {
  Fixture f(32);
  GlrtEngine engine(f.cfg, f.spec);
  engine.evaluate(f.rx, f.frames, f.plan, f.beam, f.grid);
  Rng rng(2);
  const CfarConfig cfar = calibrate_cfar(1e-4, CfarConfig{}, rng, 20000);
  for (auto _ : state) benchmark::DoNotOptimize(os_cfar(f.grid, cfar));
}
BENCHMARK(BM_OsCfar)->Unit(benchmark::kMicrosecond);

void BM_CfarCalibration(benchmark::State& state) {
  for (auto _ : state) {
    Rng rng(3);
    benchmark::DoNotOptimize(calibrate_cfar(1e-4, CfarConfig{}, rng));
  }
}
BENCHMARK(BM_CfarCalibration)->Unit(benchmark::kMillisecond);

void BM_TxBeamDesign(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(design_tx_beam(0.2, 10.0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_TxBeamDesign)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Trial(benchmark::State& state) {
  auto rc = run_config_from(KeyValueFile::parse("N_a = 32\nepochs = 60\ncfar.alpha = 7.12\n"));
  const Pipeline p = prepare_pipeline(rc);
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(p, Policy::adaptive(), 0));
}
BENCHMARK(BM_Trial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
