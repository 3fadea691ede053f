// isac_sim: command-line front end of the tracking simulator.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "isac/harness.hpp"
#include "isac/selfcheck.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace isac;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

RunConfig read_run_config(const std::string& path, std::optional<std::uint64_t> seed,
                          std::optional<double> delta_T, std::optional<int> threads) {
  RunConfig rc = path.empty() ? RunConfig{} : load_run_config(path);
  if (seed) rc.system.seed = *seed;
  if (delta_T) rc.system.delta_T = *delta_T;
  if (threads) rc.threads = *threads;
  rc.system.validate();
  return rc;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta_T;
  std::optional<int> threads;

  void attach(CLI::App* app, bool config_required) {
    auto* opt = app->add_option("--config", config, "Config file (key = value)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    else opt->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Override the master seed");
    app->add_option("--delta-T", delta_T, "Override the epoch interval, s");
    app->add_option("--threads", threads, "Worker threads (0: all cores)");
  }
  RunConfig load() const { return read_run_config(config, seed, delta_T, threads); }
};

int cmd_run(const Common& common, const std::vector<std::string>& policy_texts, int trials,
            const fs::path& out_dir, bool export_trajectories) {
  const RunConfig rc = common.load();
  std::vector<Policy> policies;
  for (const auto& p : policy_texts) policies.push_back(Policy::parse(p));

  const auto t0 = std::chrono::steady_clock::now();
  const Pipeline pipeline = prepare_pipeline(rc);
  std::cerr << "cfar alpha = " << pipeline.cfar.alpha << " (p_fa " << pipeline.cfar.p_fa << ")\n";
  const auto summaries = run_ensemble(pipeline, trials, policies);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "epochs.csv");
    write_epochs_csv(out, summaries);
  }
  for (const auto& s : summaries) {
    auto cdf = open_out(out_dir / ("cdf_" + s.policy + ".csv"));
    write_cdf_csv(cdf, s);
    auto pos = open_out(out_dir / ("position_" + s.policy + ".csv"));
    write_position_csv(pos, s);
  }
  {
    auto out = open_out(out_dir / "summary.json");
    write_summary_json(out, pipeline, summaries);
  }
  if (export_trajectories) {
    for (int i = 0; i < trials; ++i) {
      auto out = open_out(out_dir / ("trajectory_" + std::to_string(i) + ".csv"));
      write_trajectory_csv(out, trial_trajectory(pipeline, static_cast<std::uint64_t>(i)));
    }
  }

  int violations = 0;
  for (const auto& s : summaries) {
    std::printf("%-12s epochs %6d  coverage %.3f  median SE (covered) %.2f  p95 SE %.2f\n",
                s.policy.c_str(), s.epochs, s.coverage_rate, s.median_se_covered,
                s.quantile(0.95));
    for (const auto& issue : check_invariants(s)) {
      std::cerr << "invariant violation: " << issue << '\n';
      ++violations;
    }
  }
  std::printf("%d trials in %.1f s, results in %s\n", trials, secs, out_dir.c_str());
  return violations == 0 ? 0 : 2;
}

int cmd_calibrate(const Common& common, std::optional<double> p_fa, int windows) {
  const RunConfig rc = common.load();
  const double target = p_fa.value_or(rc.system.P_fa);
  Rng rng = make_rng(rc.system.seed, Stream::kCfarCalibration);
  const CfarConfig cfar = calibrate_cfar(target, rc.cfar, rng, windows);
  nlohmann::json j = {{"p_fa", cfar.p_fa},
                      {"alpha", cfar.alpha},
                      {"window", cfar.window},
                      {"guard", cfar.guard},
                      {"k_fraction", cfar.k_fraction},
                      {"reference_cells", cfar.reference_cells()},
                      {"k", cfar.order_index(cfar.reference_cells())},
                      {"windows", windows}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_oracle_check(int seeds, double tolerance) {
  double worst = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const OracleComparison c = compare_fast_to_oracle(static_cast<std::uint64_t>(s));
    std::printf("seed %3d  cells %zu  max relative deviation %.3e\n", s, c.cells, c.max_relative);
    worst = std::max(worst, c.max_relative);
  }
  const bool ok = worst <= tolerance;
  std::printf("%s: worst %.3e (tolerance %.1e)\n", ok ? "PASS" : "FAIL", worst, tolerance);
  return ok ? 0 : 1;
}

int cmd_beam(double angle_deg, double width_deg, int n_a, int points, const fs::path& out) {
  const TxBeam beam = design_tx_beam(deg2rad(angle_deg), width_deg, n_a);
  auto file = open_out(out);
  write_beam_pattern_csv(file, beam, points);
  return 0;
}

int cmd_trajectory(const Common& common, int trial, const fs::path& out) {
  RunConfig rc = common.load();
  rc.cfar_alpha = 1.0;  // no calibration needed
  const Pipeline pipeline = prepare_pipeline(rc);
  auto file = open_out(out);
  write_trajectory_csv(file, trial_trajectory(pipeline, static_cast<std::uint64_t>(trial)));
  return 0;
}

// One sensing epoch with the beam and receive window centered on the true
// position, dumped for inspection.
int cmd_epoch(const Common& common, int trial, int epoch, double width_deg, const fs::path& dir) {
  const RunConfig rc = common.load();
  const Pipeline pipeline = prepare_pipeline(rc);
  const SystemConfig& cfg = rc.system;
  const Trajectory traj = trial_trajectory(pipeline, static_cast<std::uint64_t>(trial));
  if (epoch < 0 || epoch >= static_cast<int>(traj.states.size())) throw Error("epoch out of range");
  const TargetState& state = traj.states[epoch];

  Rng rng = make_rng(cfg.seed, Stream::kTest, static_cast<std::uint64_t>(trial));
  const auto layout = scatterer_layout(rc.scenario.target_length, rc.scenario.target_width,
                                       rc.scenario.scatterers_per_side, cfg.sigma_rcs_total);
  const auto paths = scatter_paths(state, visible_scatterers(state, layout), cfg, rng);
  const double phi = bearing(state.position);
  const double d = state.position.norm();
  const TxBeam beam = design_tx_beam(phi, width_deg, cfg.N_a);
  const DftCodebook codebook = place_rx_codebook(phi, width_deg, cfg).build(cfg.N_a);
  const RxReductionPlan plan = draw_reduction_plan(codebook, cfg.B, cfg.N_rf, rng);
  const auto frames = generate_frames(cfg, rng);
  const double offset = std::max(0.0, 2.0 * d / cfg.c - 0.5 * cfg.T_cp);
  std::vector<ScatterPath> in_gate;
  for (const auto& p : paths) {
    if (p.delay - offset >= 0 && p.delay - offset < cfg.T_cp) in_gate.push_back(p);
  }
  const RxBlocks rx = simulate_epoch_rx(in_gate, frames, beam, plan, cfg, offset, rng);
  DetectionGrid grid = make_grid(cfg, rc.grid, codebook, offset);
  GlrtEngine(cfg, rc.grid).evaluate(rx, frames, plan, beam, grid);
  const auto dets = os_cfar(grid, pipeline.cfar);

  fs::create_directories(dir);
  {
    auto out = open_out(dir / "rx_blocks.bin", std::ios::binary);
    write_rx_blocks(out, rx);
  }
  {
    auto out = open_out(dir / "grid.csv");
    write_grid_csv(out, grid);
  }
  {
    auto out = open_out(dir / "detections.csv");
    write_detections_csv(out, dets);
  }
  {
    auto out = open_out(dir / "detections.json");
    write_detections_json(out, dets);
  }
  {
    auto out = open_out(dir / "beam.csv");
    write_beam_pattern_csv(out, beam);
  }
  std::printf("%zu paths (%zu in gate), %zu cells, %zu detections\n", paths.size(),
              in_gate.size(), grid.cells(), dets.size());
  if (!dets.empty()) {
    const Vec2 est = fuse_center(dets, cfg.c);
    std::printf("fused (%.2f, %.2f) m, truth (%.2f, %.2f) m\n", est.x, est.y, state.position.x,
                state.position.y);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISAC beam tracking simulator"};
  app.require_subcommand(1);

  Common run_common;
  std::vector<std::string> policies{"adaptive"};
  int trials = 100;
  std::string out_dir = "results";
  bool export_traj = false;
  auto* run = app.add_subcommand("run", "Monte-Carlo ensemble over random trajectories");
  run_common.attach(run, true);
  run->add_option("--policy", policies, "adaptive or fixed:<deg>; repeatable")->capture_default_str();
  run->add_option("--trials", trials, "Trajectories per policy")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--export-trajectories", export_traj, "Also write trajectory_<i>.csv");

  Common cal_common;
  std::optional<double> p_fa;
  int windows = 200000;
  auto* cal = app.add_subcommand("calibrate-cfar", "Calibrate the OS-CFAR scale factor");
  cal_common.attach(cal, false);
  cal->add_option("--pfa", p_fa, "Target false-alarm probability (default: config P_fa)");
  cal->add_option("--windows", windows, "Monte-Carlo reference windows")->check(CLI::PositiveNumber);

  int seeds = 20;
  double tolerance = 1e-9;
  auto* oracle = app.add_subcommand("oracle-check", "Fast GLRT map against the brute-force oracle");
  oracle->add_option("--seeds", seeds, "Random instances")->check(CLI::PositiveNumber);
  oracle->add_option("--tolerance", tolerance, "Max relative deviation");

  double angle = 0.0, width = 10.0;
  int n_a = 64, points = 1024;
  std::string beam_out = "beam.csv";
  auto* beam = app.add_subcommand("beam", "Transmit beam pattern to CSV");
  beam->add_option("--angle", angle, "Center angle, degrees");
  beam->add_option("--width", width, "Main-lobe width, degrees");
  beam->add_option("--n-a", n_a, "Array elements");
  beam->add_option("--points", points, "Pattern samples");
  beam->add_option("--out", beam_out, "Output file");

  Common traj_common;
  int trial = 0;
  std::string traj_out = "trajectory.csv";
  auto* traj = app.add_subcommand("trajectory", "Trajectory of one trial to CSV");
  traj_common.attach(traj, false);
  traj->add_option("--trial", trial, "Trial index");
  traj->add_option("--out", traj_out, "Output file");

  Common epoch_common;
  int epoch_trial = 0, epoch_index = 0;
  double epoch_width = 10.0;
  std::string epoch_out = "epoch";
  auto* ep = app.add_subcommand("epoch", "Dump one sensing epoch (rx blocks, map, detections)");
  epoch_common.attach(ep, false);
  ep->add_option("--trial", epoch_trial, "Trial index");
  ep->add_option("--epoch", epoch_index, "Epoch index");
  ep->add_option("--width", epoch_width, "Transmit beamwidth, degrees");
  ep->add_option("--out", epoch_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_common, policies, trials, out_dir, export_traj);
    if (*cal) return cmd_calibrate(cal_common, p_fa, windows);
    if (*oracle) return cmd_oracle_check(seeds, tolerance);
    if (*beam) return cmd_beam(angle, width, n_a, points, beam_out);
    if (*traj) return cmd_trajectory(traj_common, trial, traj_out);
    if (*ep) return cmd_epoch(epoch_common, epoch_trial, epoch_index, epoch_width, epoch_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
