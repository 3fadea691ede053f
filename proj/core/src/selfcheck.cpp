#include "isac/selfcheck.hpp"

#include <algorithm>
#include <cmath>

#include "isac/array.hpp"
#include "isac/channel.hpp"
#include "isac/random.hpp"
#include "isac/scene.hpp"

namespace isac {

SystemConfig small_instance_config() {
  SystemConfig cfg;
  cfg.N_a = 16;
  cfg.N_rf = 2;
  cfg.B = 2;
  cfg.N = 2;
  cfg.M = 8;
  cfg.D = 3;
  cfg.W = cfg.M * cfg.delta_f;
  cfg.T_cp = 1.0 / cfg.delta_f;
  return cfg;
}

GridSpec small_instance_grid() {
  GridSpec g;
  g.doppler_oversample = 2;
  g.doppler_cells = 8;
  g.delay_cells = 8;
  g.angle_cells = 9;
  return g;
}

OracleComparison compare_fast_to_oracle(std::uint64_t seed) {
  const SystemConfig cfg = small_instance_config();
  const GridSpec spec = small_instance_grid();
  Rng rng = make_rng(seed, Stream::kTest);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double center = unit(rng) - 0.5;
  const DftCodebook codebook = build_codebook(cfg.N_a, center, cfg.D);
  const RxReductionPlan plan = draw_reduction_plan(codebook, cfg.B, cfg.N_rf, rng);
  const TxBeam beam = design_tx_beam(std::asin(center), 20.0, cfg.N_a);
  const auto frames = generate_frames(cfg, rng);

  std::vector<ScatterPath> paths(2);
  for (auto& p : paths) {
    p.angle = std::asin(std::clamp(center + 0.2 * (unit(rng) - 0.5), -0.99, 0.99));
    p.delay = unit(rng) * 0.9 * cfg.T_cp;
    p.doppler = (unit(rng) - 0.5) / cfg.T0();
    p.gain = std::polar(std::sqrt(noise_variance(cfg) / cfg.P_tx) * (1.0 + 4.0 * unit(rng)),
                        2.0 * kPi * unit(rng));
  }
  const RxBlocks rx = simulate_epoch_rx(paths, frames, beam, plan, cfg, 0.0, rng);

  DetectionGrid grid = make_grid(cfg, spec, codebook);
  GlrtEngine engine(cfg, spec);
  engine.evaluate(rx, frames, plan, beam, grid);

  OracleComparison out;
  out.cells = grid.cells();
  for (int ia = 0; ia < grid.n_angle(); ++ia) {
    for (int it = 0; it < grid.n_delay(); ++it) {
      for (int in = 0; in < grid.n_doppler(); ++in) {
        const GlrtValue o = glrt_statistic_oracle(rx, frames, plan, beam, cfg, grid.doppler[in],
                                                  grid.delay[it], grid.angle(ia));
        const std::size_t k = grid.index(in, it, ia);
        const double ds = std::abs(grid.stat[k] - o.stat);
        const double da = std::abs(grid.amplitude[k] - o.amplitude);
        out.peak = std::max(out.peak, o.stat);
        out.max_absolute = std::max(out.max_absolute, ds);
        if (o.stat > 0) out.max_relative = std::max(out.max_relative, ds / o.stat);
        if (std::abs(o.amplitude) > 0) {
          out.max_relative = std::max(out.max_relative, da / std::abs(o.amplitude));
        }
      }
    }
  }
  return out;
}

}  // namespace isac
