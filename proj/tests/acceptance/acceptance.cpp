// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "isac/detector.hpp"
#include "isac/harness.hpp"
#include "isac/selfcheck.hpp"
#include "isac/tracker.hpp"

namespace {

using namespace isac;
using Clock = std::chrono::steady_clock;

constexpr double kOracleTolerance = 1e-9;
constexpr double kOracleSeconds = 10;
constexpr int kLocalizationSeeds = 100;
constexpr double kAmplitudeTolerance = 1e-10;
constexpr double kLocalizationSeconds = 60;
constexpr std::size_t kKsSamples = 10000;
constexpr double kKsMinP = 0.01;
constexpr double kKsSeconds = 60;
constexpr double kCfarPfa = 1e-2;
constexpr std::size_t kCfarCells = 1'000'000;
constexpr double kCfarSeconds = 300;
constexpr int kPredictorDraws = 1000;
constexpr double kPredictorTolerance = 1e-9;  // m
constexpr double kPredictorSeconds = 1;
constexpr double kInvarianceTolerance = 1e-12;
constexpr int kEnsembleTrials = 50;
constexpr double kCoverageTarget = 0.9;
constexpr double kMedianSeTarget = 2.0;  // bits/s/Hz
constexpr double kCriterion7Seconds = 15 * 60;
constexpr double kCriterion8Seconds = 30 * 60;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

SystemConfig reference_na32() {
  SystemConfig cfg;
  cfg.N_a = 32;
  cfg.D = 6;
  return cfg;
}

struct Epoch {
  DftCodebook cb;
  RxReductionPlan plan;
  std::vector<OfdmFrame> frames;
  TxBeam beam;
  DetectionGrid grid;
};

Epoch random_epoch(const SystemConfig& cfg, const GridSpec& spec, double width, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  const double center = u(rng);
  Epoch e;
  e.cb = build_codebook(cfg.N_a, center, cfg.D);
  e.plan = draw_reduction_plan(e.cb, cfg.B, cfg.N_rf, rng);
  e.frames = generate_frames(cfg, rng);
  e.beam = design_tx_beam(std::asin(center), width, cfg.N_a);
  e.grid = make_grid(cfg, spec, e.cb);
  return e;
}

bool criterion1() {
  const auto t0 = Clock::now();
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    worst = std::max(worst, compare_fast_to_oracle(seed).max_relative);
  }
  const double secs = seconds_since(t0);
  return report(1, worst <= kOracleTolerance && secs < kOracleSeconds,
                fmt("oracle equivalence: max relative deviation %.3e over 20 seeds (<= %.0e), %.2f s",
                    worst, kOracleTolerance, secs));
}

bool criterion2() {
  const auto t0 = Clock::now();
  SystemConfig cfg = reference_na32();
  cfg.N_0 = 0;
  const GridSpec spec;
  GlrtEngine engine(cfg, spec);
  int hits = 0;
  double worst_amp = 0;
  for (int seed = 0; seed < kLocalizationSeeds; ++seed) {
    Rng rng = make_rng(seed, Stream::kTest, 2);
    Epoch e = random_epoch(cfg, spec, 15.0, rng);
    std::uniform_int_distribution<int> pn(0, e.grid.n_doppler() - 1);
    std::uniform_int_distribution<int> pt(0, e.grid.n_delay() - 1);
    std::uniform_int_distribution<int> pa(0, e.grid.n_angle() - 1);
    std::uniform_real_distribution<double> ph(0, 2 * kPi);
    const int in = pn(rng), it = pt(rng), ia = pa(rng);
    ScatterPath p;
    p.doppler = e.grid.doppler[in];
    p.delay = e.grid.delay[it];
    p.angle = e.grid.angle(ia);
    p.gain = std::polar(std::sqrt(radar_gain(40.0, 100.0 / 12, cfg)), ph(rng));
    const auto rx = simulate_epoch_rx({p}, e.frames, e.beam, e.plan, cfg, 0.0, rng);
    engine.evaluate(rx, e.frames, e.plan, e.beam, e.grid);
    const auto k = static_cast<std::size_t>(
        std::max_element(e.grid.stat.begin(), e.grid.stat.end()) - e.grid.stat.begin());
    hits += k == e.grid.index(in, it, ia);
    const Complex truth = p.gain * std::sqrt(cfg.P_tx);
    worst_amp = std::max(worst_amp, std::abs(e.grid.amplitude[e.grid.index(in, it, ia)] - truth) /
                                        std::abs(truth));
  }
  const double secs = seconds_since(t0);
  return report(2,
                hits == kLocalizationSeeds && worst_amp <= kAmplitudeTolerance &&
                    secs < kLocalizationSeconds,
                fmt("noiseless localization: argmax on true cell %d/%d, max h' relative error "
                    "%.3e (<= %.0e), %.2f s",
                    hits, kLocalizationSeeds, worst_amp, kAmplitudeTolerance, secs));
}

double ks_pvalue_exponential(std::vector<double> x, double& d_out) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = -std::expm1(-x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  d_out = d;
  // Asymptotic Kolmogorov tail with the Stephens small-sample correction.
  const double sn = std::sqrt(n);
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k) p += 2 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

bool criterion3() {
  const auto t0 = Clock::now();
  const SystemConfig cfg = reference_na32();
  const GridSpec spec;
  const double sigma2 = noise_variance(cfg);
  GlrtEngine engine(cfg, spec);
  Rng rng = make_rng(cfg.seed, Stream::kTest, 3);
  // At natural resolution the (Doppler, delay) cells of one angle are
  // orthogonal phase ramps, so their noise statistics are independent.
  std::vector<double> samples;
  std::uniform_int_distribution<int> pick_angle(0, 4 * cfg.D);
  while (samples.size() < kKsSamples) {
    Epoch e = random_epoch(cfg, spec, 7.0, rng);
    const auto rx = simulate_epoch_rx({}, e.frames, e.beam, e.plan, cfg, 0.0, rng);
    engine.evaluate(rx, e.frames, e.plan, e.beam, e.grid);
    const int ia = pick_angle(rng) % e.grid.n_angle();
    for (int it = 0; it < e.grid.n_delay(); ++it)
      for (int in = 0; in < e.grid.n_doppler(); ++in)
        samples.push_back(e.grid.stat[e.grid.index(in, it, ia)] / sigma2);
  }
  double mean = 0;
  for (double s : samples) mean += s;
  mean /= samples.size();
  double d = 0;
  const double p = ks_pvalue_exponential(samples, d);
  const double secs = seconds_since(t0);
  return report(3, p > kKsMinP && secs < kKsSeconds,
                fmt("noise-only l/sigma^2: %zu cells, mean %.4f, KS D %.4f, p %.3f (> %.2f), %.2f s",
                    samples.size(), mean, d, p, kKsMinP, secs));
}

bool criterion4() {
  const auto t0 = Clock::now();
  const SystemConfig cfg = reference_na32();
  const GridSpec spec;
  std::map<double, double> alpha;
  for (double pfa : {1e-1, 1e-2, 1e-3}) {
    Rng cal = make_rng(cfg.seed, Stream::kCfarCalibration);
    alpha[pfa] = calibrate_cfar(pfa, CfarConfig{}, cal).alpha;
  }
  const bool monotone = alpha[1e-1] < alpha[1e-2] && alpha[1e-2] < alpha[1e-3];
  Rng cal = make_rng(cfg.seed, Stream::kCfarCalibration);
  const CfarConfig cfar = calibrate_cfar(kCfarPfa, CfarConfig{}, cal);

  GlrtEngine engine(cfg, spec);
  Rng rng = make_rng(cfg.seed, Stream::kTest, 4);
  std::size_t cells = 0, alarms = 0;
  while (cells < kCfarCells) {
    Epoch e = random_epoch(cfg, spec, 7.0, rng);
    const auto rx = simulate_epoch_rx({}, e.frames, e.beam, e.plan, cfg, 0.0, rng);
    engine.evaluate(rx, e.frames, e.plan, e.beam, e.grid);
    alarms += os_cfar(e.grid, cfar).size();
    cells += e.grid.cells();
  }
  const double rate = double(alarms) / cells;
  const double secs = seconds_since(t0);
  const bool in_band = rate >= kCfarPfa / 3 && rate <= 3 * kCfarPfa;
  return report(4, in_band && monotone && secs < kCfarSeconds,
                fmt("CFAR at P_fa %.0e: alpha %.4f, rate %.4e over %zu GLRT noise cells "
                    "(band [%.2e, %.2e]); alpha(1e-1,1e-2,1e-3) = %.4f, %.4f, %.4f %s, %.1f s",
                    kCfarPfa, cfar.alpha, rate, cells, kCfarPfa / 3, 3 * kCfarPfa, alpha[1e-1],
                    alpha[1e-2], alpha[1e-3], monotone ? "monotone" : "NOT monotone", secs));
}

bool criterion5() {
  const auto t0 = Clock::now();
  const SystemConfig cfg;
  TrackerSettings settings;
  Rng rng = make_rng(cfg.seed, Stream::kTest, 5);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int draw = 0; draw < kPredictorDraws; ++draw) {
    TargetState st;
    st.position = {40 * u(rng), 70 + 30 * u(rng)};
    st.velocity = {15 * u(rng), 15 * u(rng)};
    const Vec2 accel{3 * u(rng), 3 * u(rng)};
    TrackState track;
    for (int t = 0; t < 10; ++t) {
      if (track.ready()) worst = std::max(worst, (track.prediction->position - st.position).norm());
      warmup_epoch(track, st.position, cfg, settings);
      st = step_kinematics(st, cfg.delta_T, accel);
    }
  }
  const double secs = seconds_since(t0);
  return report(5, worst < kPredictorTolerance && secs < kPredictorSeconds,
                fmt("predictor exactness: max error %.3e m over %d constant-acceleration draws "
                    "(< %.0e m), %.3f s",
                    worst, kPredictorDraws, kPredictorTolerance, secs));
}

bool criterion6() {
  const SystemConfig cfg = reference_na32();
  const GridSpec spec;
  Rng rng = make_rng(cfg.seed, Stream::kTest, 6);
  Epoch e = random_epoch(cfg, spec, 10.0, rng);

  // Denominator from explicit G_b zeta_b at every (nu, tau), against the closed form.
  double worst_den = 0;
  const int nm = cfg.N * cfg.M;
  for (int ia = 0; ia < e.grid.n_angle(); ia += 3) {
    const double phi = e.grid.angle(ia);
    const double closed = glrt_denominator(phi, e.frames, e.plan, e.beam);
    const CVector a = steering(phi, cfg.N_a);
    const Complex tx = a.dot(e.beam.weights);
    for (int it = 0; it < e.grid.n_delay(); ++it) {
      for (int in = 0; in < e.grid.n_doppler(); ++in) {
        double explicit_den = 0;
        for (int b = 0; b < cfg.B; ++b) {
          const CVector g = (e.plan.combiners[b].adjoint() * a) * tx;
          for (int k = 0; k < nm; ++k) {
            const int n = k / cfg.M, m = k % cfg.M;
            const Complex t = std::polar(
                1.0, 2 * kPi * ((b * cfg.N + n) * cfg.T0() * e.grid.doppler[in] -
                                m * cfg.delta_f * e.grid.delay[it]));
            explicit_den += (g * (t * e.frames[b](n, m))).squaredNorm();
          }
        }
        worst_den = std::max(worst_den, std::abs(explicit_den - closed) / closed);
      }
    }
  }

  // Global-phase and gamma-scaling invariances of the full map.
  const double gamma = 2.75;
  std::vector<ScatterPath> paths(3);
  std::uniform_real_distribution<double> uu(0, 1);
  for (auto& p : paths) {
    p.angle = e.grid.angle(static_cast<int>(uu(rng) * e.grid.n_angle()) % e.grid.n_angle());
    p.delay = uu(rng) * 0.9 * cfg.T_cp;
    p.doppler = (uu(rng) - 0.5) / cfg.T0();
    p.gain = std::polar(std::sqrt(radar_gain(40.0, 8.0, cfg)), 2 * kPi * uu(rng));
  }
  auto rx = simulate_epoch_rx(paths, e.frames, e.beam, e.plan, cfg, 0.0, rng);
  GlrtEngine engine(cfg, spec);
  DetectionGrid base = e.grid, rotated = e.grid, scaled = e.grid;
  engine.evaluate(rx, e.frames, e.plan, e.beam, base);
  auto frames_rot = e.frames;
  for (auto& f : frames_rot) f *= std::polar(1.0, 0.987);
  engine.evaluate(rx, frames_rot, e.plan, e.beam, rotated);
  for (auto& blk : rx.blocks) blk *= gamma;
  engine.evaluate(rx, e.frames, e.plan, e.beam, scaled);
  double worst_phase = 0, worst_scale = 0;
  for (std::size_t k = 0; k < base.cells(); ++k) {
    if (base.stat[k] <= 0) continue;
    worst_phase = std::max(worst_phase, std::abs(rotated.stat[k] - base.stat[k]) / base.stat[k]);
    worst_scale = std::max(worst_scale, std::abs(scaled.stat[k] - gamma * gamma * base.stat[k]) /
                                            (gamma * gamma * base.stat[k]));
  }
  const bool pass = worst_den <= kInvarianceTolerance && worst_phase <= kInvarianceTolerance &&
                    worst_scale <= kInvarianceTolerance;
  return report(6, pass,
                fmt("invariances: denominator over (nu,tau) %.2e, global phase %.2e, gamma^2 "
                    "scaling %.2e (all <= %.0e)",
                    worst_den, worst_phase, worst_scale, kInvarianceTolerance));
}

struct Ensembles {
  EnsembleSummary adaptive, fixed7, fixed20, fixed7_slow;
  double seconds_fast = 0;  // the three 100 ms ensembles
  double seconds_total = 0;
};

Ensembles run_ensembles(const std::string& config_path) {
  Ensembles out;
  const auto t0 = Clock::now();
  RunConfig rc = load_run_config(config_path);
  rc.system.delta_T = 0.1;
  const Pipeline fast = prepare_pipeline(rc);
  auto s = run_ensemble(fast, kEnsembleTrials,
                        {Policy::adaptive(), Policy::fixed(7.0), Policy::fixed(20.0)});
  out.adaptive = std::move(s[0]);
  out.fixed7 = std::move(s[1]);
  out.fixed20 = std::move(s[2]);
  out.seconds_fast = seconds_since(t0);
  RunConfig slow_rc = rc;
  slow_rc.system.delta_T = 0.2;
  const Pipeline slow = prepare_pipeline(slow_rc);
  out.fixed7_slow = std::move(run_ensemble(slow, kEnsembleTrials, {Policy::fixed(7.0)})[0]);
  out.seconds_total = seconds_since(t0);
  for (const auto* e : {&out.adaptive, &out.fixed7, &out.fixed20, &out.fixed7_slow}) {
    for (const auto& issue : check_invariants(*e)) std::printf("invariant violation: %s\n", issue.c_str());
    std::printf("  %-9s dT=%.1f  epochs %6d  coverage %.3f  zero-SE %.3f  median SE(covered) %.2f  "
                "p95 SE %.2f\n",
                e->policy.c_str(), e->delta_T, e->epochs, e->coverage_rate, e->zero_se_fraction,
                e->median_se_covered, e->quantile(0.95));
  }
  return out;
}

bool criterion7(const Ensembles& e) {
  const bool cover = e.adaptive.coverage_rate >= kCoverageTarget;
  const bool se = e.adaptive.median_se_covered >= kMedianSeTarget;
  return report(7, cover && se && e.seconds_fast < kCriterion7Seconds,
                fmt("end-to-end (adaptive, N_a=32, %d trajectories, dT=100 ms): (a) coverage %.3f "
                    "(>= %.2f) %s; (b) median covered SE %.2f bits/s/Hz (>= %.1f) %s; %.0f s",
                    kEnsembleTrials, e.adaptive.coverage_rate, kCoverageTarget,
                    cover ? "ok" : "MISSED", e.adaptive.median_se_covered, kMedianSeTarget,
                    se ? "ok" : "MISSED", e.seconds_fast));
}

bool criterion8(const Ensembles& e) {
  const double a = e.adaptive.quantile(0.95);
  const double f7 = e.fixed7.quantile(0.95);
  const double f20 = e.fixed20.quantile(0.95);
  const bool between = std::min(f7, f20) <= a && a <= std::max(f7, f20);
  const bool slower = e.fixed7_slow.zero_se_fraction > e.fixed7.zero_se_fraction;
  return report(8, between && slower && e.seconds_total < kCriterion8Seconds,
                fmt("orderings: p95 SE fixed7 %.3f, adaptive %.3f, fixed20 %.3f -> %s; zero-SE "
                    "mass fixed7 dT=200 ms %.3f vs 100 ms %.3f -> %s; %.0f s",
                    f7, a, f20, between ? "in between" : "NOT in between",
                    e.fixed7_slow.zero_se_fraction, e.fixed7.zero_se_fraction,
                    slower ? "larger" : "NOT larger", e.seconds_total));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> selected;
  std::string config = ISAC_ACCEPTANCE_CONFIG;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")
      ->check(CLI::Range(1, 8));
  app.add_option("--config", config, "Run config of the end-to-end ensembles");
  CLI11_PARSE(app, argc, argv);
  std::set<int> want(selected.begin(), selected.end());
  if (want.empty()) want = {1, 2, 3, 4, 5, 6, 7, 8};

  bool ok = true;
  try {
    if (want.count(1)) ok &= criterion1();
    if (want.count(2)) ok &= criterion2();
    if (want.count(3)) ok &= criterion3();
    if (want.count(4)) ok &= criterion4();
    if (want.count(5)) ok &= criterion5();
    if (want.count(6)) ok &= criterion6();
    if (want.count(7) || want.count(8)) {
      const Ensembles e = run_ensembles(config);
      if (want.count(7)) ok &= criterion7(e);
      if (want.count(8)) ok &= criterion8(e);
    }
  } catch (const std::exception& ex) {
    std::printf("error: %s\n", ex.what());
    return 1;
  }
  return ok ? 0 : 1;
}
