#include "isac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace isac {

const std::vector<std::string>& harness_keys() {
  static const std::vector<std::string> keys{"harness.warmup_epochs", "harness.threads"};
  return keys;
}

RunConfig run_config_from(const KeyValueFile& kv) {
  std::vector<std::string> known = system_config_keys();
  for (const auto* group : {&grid_keys(), &cfar_keys(), &tracker_keys(), &scenario_keys(),
                            &harness_keys()}) {
    known.insert(known.end(), group->begin(), group->end());
  }
  kv.require_known(known);

  RunConfig rc;
  rc.system = system_config_from(kv);
  rc.system.validate();
  rc.grid = grid_spec_from(kv);
  rc.cfar = cfar_geometry_from(kv);
  rc.cfar_alpha = kv.get_double("cfar.alpha");
  if (auto v = kv.get_int("cfar.calibration_windows")) rc.calibration_windows = static_cast<int>(*v);
  rc.tracker = tracker_settings_from(kv);
  rc.scenario = scenario_from(kv);
  if (!kv.contains("tracker.target_extent")) {
    rc.tracker.target_extent = std::max(rc.scenario.target_length, rc.scenario.target_width);
  }
  if (auto v = kv.get_int("harness.warmup_epochs")) rc.warmup_epochs = static_cast<int>(*v);
  if (auto v = kv.get_int("harness.threads")) rc.threads = static_cast<int>(*v);
  if (rc.warmup_epochs < 3) throw Error("config: harness.warmup_epochs must be >= 3");
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from(KeyValueFile::read(path));
}

Policy Policy::parse(const std::string& text) {
  if (text == "adaptive") return adaptive();
  if (text.rfind("fixed:", 0) == 0) {
    const std::string num = text.substr(6);
    char* end = nullptr;
    const double w = std::strtod(num.c_str(), &end);
    if (num.empty() || end != num.c_str() + num.size() || !(w > 0 && w < 90)) {
      throw Error("policy: bad fixed width '" + num + "'");
    }
    return fixed(w);
  }
  throw Error("policy: expected 'adaptive' or 'fixed:<deg>', got '" + text + "'");
}

std::string Policy::label() const {
  if (!fixed_width) return "adaptive";
  std::ostringstream s;
  s << "fixed_" << *fixed_width;
  return s.str();
}

double spectral_efficiency(double phi0, double d0, const TxBeam& beam, bool covered,
                           const SystemConfig& cfg) {
  if (!(d0 > 0)) throw Error("spectral_efficiency: distance must be > 0");
  if (!covered) return 0.0;
  const double noise = cfg.N_0 * cfg.W;
  const double signal = cfg.P_tx * beam.gain(phi0) * comm_gain(d0, cfg);
  if (noise == 0.0) return signal > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::log2(1.0 + signal / noise);
}

bool coverage_flag(const std::vector<ScatterPath>& visible, const TxBeam& beam) {
  return std::all_of(visible.begin(), visible.end(),
                     [&](const ScatterPath& p) { return in_mainlobe(beam, p.angle); });
}

Pipeline prepare_pipeline(const RunConfig& config) {
  config.system.validate();
  Pipeline p;
  p.config = config;
  if (config.cfar_alpha) {
    p.cfar = config.cfar;
    p.cfar.alpha = *config.cfar_alpha;
    p.cfar.p_fa = config.system.P_fa;
    p.cfar.validate();
  } else {
    Rng rng = make_rng(config.system.seed, Stream::kCfarCalibration);
    p.cfar = calibrate_cfar(config.system.P_fa, config.cfar, rng, config.calibration_windows);
  }
  return p;
}

Trajectory trial_trajectory(const Pipeline& pipeline, std::uint64_t trial) {
  Rng rng = make_rng(pipeline.config.system.seed, Stream::kTrajectory, trial);
  return generate_trajectory(pipeline.config.system, pipeline.config.scenario, rng);
}

std::vector<EpochRecord> run_trial(const Pipeline& pipeline, const Policy& policy,
                                   std::uint64_t trial) {
  return run_trial(pipeline, trial_trajectory(pipeline, trial), policy, trial);
}

std::vector<EpochRecord> run_trial(const Pipeline& pipeline, const Trajectory& trajectory,
                                   const Policy& policy, std::uint64_t trial) {
  const RunConfig& rc = pipeline.config;
  const SystemConfig& cfg = rc.system;
  const std::uint64_t seed = cfg.seed;
  Rng phase_rng = make_rng(seed, Stream::kScatterPhase, trial);
  Rng frame_rng = make_rng(seed, Stream::kFrames, trial);
  Rng plan_rng = make_rng(seed, Stream::kReductionPlan, trial);
  Rng noise_rng = make_rng(seed, Stream::kNoise, trial);
  Rng warm_rng = make_rng(seed, Stream::kWarmup, trial);
  std::normal_distribution<double> warm_noise(0.0, rc.tracker.warmup_sigma);

  TrackerSettings settings = rc.tracker;
  settings.fixed_width = policy.fixed_width;

  const auto layout = scatterer_layout(rc.scenario.target_length, rc.scenario.target_width,
                                       rc.scenario.scatterers_per_side, cfg.sigma_rcs_total);
  GlrtEngine engine(cfg, rc.grid);
  TrackState track;
  std::vector<EpochRecord> records;
  records.reserve(trajectory.states.size());

  for (std::size_t t = 0; t < trajectory.states.size(); ++t) {
    const TargetState& truth = trajectory.states[t];
    EpochRecord rec;
    rec.trial = static_cast<int>(trial);
    rec.epoch = static_cast<int>(t);
    rec.arc_length = trajectory.arc_length[t];
    rec.truth = truth.position;
    const auto visible = visible_scatterers(truth, layout);
    const auto paths = scatter_paths(truth, visible, cfg, phase_rng);
    rec.visible = static_cast<int>(paths.size());

    if (static_cast<int>(t) < rc.warmup_epochs || !track.ready()) {
      const Vec2 est = truth.position + Vec2{warm_noise(warm_rng), warm_noise(warm_rng)};
      warmup_epoch(track, est, cfg, settings);
      rec.warmup = true;
      rec.estimate = est;
      rec.estimate_error = (est - truth.position).norm();
      records.push_back(rec);
      continue;
    }

    const Prediction pred = *track.prediction;
    const double width = track.beamwidth_deg;
    const double half = deg2rad(width) / 2.0;
    // Predictions of a lost track may leave the sector; the beam stays inside it.
    const double limit = std::min(kPi / 2 - half - deg2rad(1.0), deg2rad(rc.scenario.fov_half_deg));
    const double pointing = std::clamp(pred.angle, -limit, limit);
    const TxBeam beam = design_tx_beam(pointing, width, cfg.N_a);
    const DftCodebook codebook = place_rx_codebook(pointing, width, cfg).build(cfg.N_a);
    const RxReductionPlan plan = draw_reduction_plan(codebook, cfg.B, cfg.N_rf, plan_rng);
    const auto frames = generate_frames(cfg, frame_rng);

    // The receive window opens half a cyclic prefix before the predicted echo.
    const double offset = std::max(0.0, 2.0 * pred.distance / cfg.c - 0.5 * cfg.T_cp);
    std::vector<ScatterPath> in_gate;
    for (const auto& p : paths) {
      const double residual = p.delay - offset;
      if (residual >= 0.0 && residual < cfg.T_cp) in_gate.push_back(p);
    }
    rec.in_gate = static_cast<int>(in_gate.size());

    const RxBlocks rx = simulate_epoch_rx(in_gate, frames, beam, plan, cfg, offset, noise_rng);
    DetectionGrid grid = make_grid(cfg, rc.grid, codebook, offset);
    engine.evaluate(rx, frames, plan, beam, grid);
    const auto detections = os_cfar(grid, pipeline.cfar);

    rec.covered = coverage_flag(paths, beam);
    const CommLink link = comm_link(truth.position, cfg);
    rec.se = spectral_efficiency(link.angle, link.distance, beam, rec.covered, cfg);
    rec.predicted = pred.position;
    rec.prediction_error = (pred.position - truth.position).norm();
    rec.angle_error = pointing - bearing(truth.position);
    rec.beamwidth = width;
    rec.detections = static_cast<int>(detections.size());
    rec.coasted = detections.empty();

    track_epoch(track, detections, cfg, settings);
    rec.estimate = track.history.back();
    rec.estimate_error = (rec.estimate - truth.position).norm();
    records.push_back(rec);
  }
  return records;
}

double EnsembleSummary::cdf(double x) const {
  if (se_sorted.empty()) return 0.0;
  const auto it = std::upper_bound(se_sorted.begin(), se_sorted.end(), x);
  return static_cast<double>(it - se_sorted.begin()) / se_sorted.size();
}

double EnsembleSummary::quantile(double q) const {
  if (se_sorted.empty()) return 0.0;
  const double h = (se_sorted.size() - 1) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, se_sorted.size() - 1);
  if (se_sorted[hi] == se_sorted[lo]) return se_sorted[lo];  // also keeps inf samples finite-safe
  return se_sorted[lo] + (h - lo) * (se_sorted[hi] - se_sorted[lo]);
}

EnsembleSummary summarize(const std::string& policy, double delta_T,
                          std::vector<std::vector<EpochRecord>> trials) {
  EnsembleSummary s;
  s.policy = policy;
  s.delta_T = delta_T;
  s.trials = static_cast<int>(trials.size());
  std::vector<double> covered_se;
  std::vector<PositionBin> bins;
  int covered = 0;
  for (auto& trial : trials) {
    for (auto& rec : trial) {
      if (!rec.warmup) {
        ++s.epochs;
        s.se_sorted.push_back(rec.se);
        if (rec.covered) {
          ++covered;
          covered_se.push_back(rec.se);
        }
        const int bin = static_cast<int>(std::floor(rec.arc_length));
        if (bin >= static_cast<int>(bins.size())) bins.resize(bin + 1);
        bins[bin].bin = bin;
        bins[bin].samples += 1;
        bins[bin].coverage += rec.covered ? 1.0 : 0.0;
        bins[bin].mean_se += rec.se;
      }
      s.records.push_back(std::move(rec));
    }
  }
  std::sort(s.se_sorted.begin(), s.se_sorted.end());
  std::sort(covered_se.begin(), covered_se.end());
  if (s.epochs > 0) {
    s.coverage_rate = static_cast<double>(covered) / s.epochs;
    s.zero_se_fraction = s.cdf(0.0);
  }
  if (!covered_se.empty()) {
    const std::size_t n = covered_se.size();
    s.median_se_covered =
        n % 2 ? covered_se[n / 2] : 0.5 * (covered_se[n / 2 - 1] + covered_se[n / 2]);
  }
  for (auto& b : bins) {
    if (b.samples == 0) continue;
    b.coverage /= b.samples;
    b.mean_se /= b.samples;
    s.by_position.push_back(b);
  }
  return s;
}

std::vector<EnsembleSummary> run_ensemble(const Pipeline& pipeline, int n_trials,
                                          const std::vector<Policy>& policies) {
  if (n_trials < 1) throw Error("run_ensemble: need at least one trial");
  int threads = pipeline.config.threads > 0 ? pipeline.config.threads
                                            : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, n_trials);

  std::vector<EnsembleSummary> out;
  for (const auto& policy : policies) {
    std::vector<std::vector<EpochRecord>> results(n_trials);
    std::vector<std::exception_ptr> errors(n_trials);
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int i = next++; i < n_trials; i = next++) {
        try {
          results[i] = run_trial(pipeline, policy, static_cast<std::uint64_t>(i));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    out.push_back(summarize(policy.label(), pipeline.config.system.delta_T, std::move(results)));
  }
  return out;
}

std::vector<std::string> check_invariants(const EnsembleSummary& s) {
  std::vector<std::string> issues;
  for (const auto& r : s.records) {
    if (r.se < 0) {
      issues.push_back(s.policy + ": negative SE at trial " + std::to_string(r.trial) +
                       " epoch " + std::to_string(r.epoch));
    }
    if (!r.covered && r.se != 0.0) {
      issues.push_back(s.policy + ": SE > 0 without coverage at trial " +
                       std::to_string(r.trial) + " epoch " + std::to_string(r.epoch));
    }
    if (r.visible < 1) {
      issues.push_back(s.policy + ": no visible scatterers at trial " + std::to_string(r.trial) +
                       " epoch " + std::to_string(r.epoch));
    }
  }
  if (!std::is_sorted(s.se_sorted.begin(), s.se_sorted.end())) {
    issues.push_back(s.policy + ": SE CDF not monotone");
  }
  if (!s.se_sorted.empty() && s.cdf(s.se_sorted.back()) != 1.0) {
    issues.push_back(s.policy + ": SE CDF does not end at 1");
  }
  return issues;
}

void write_epochs_csv(std::ostream& out, const std::vector<EnsembleSummary>& summaries) {
  out << "policy,trial,epoch,warmup,arc_length,truth_x,truth_y,visible,in_gate,covered,se,"
         "est_x,est_y,pred_x,pred_y,estimate_error,prediction_error,angle_error,beamwidth,"
         "detections,coasted\n";
  out.precision(10);
  for (const auto& s : summaries) {
    for (const auto& r : s.records) {
      out << s.policy << ',' << r.trial << ',' << r.epoch << ',' << r.warmup << ','
          << r.arc_length << ',' << r.truth.x << ',' << r.truth.y << ',' << r.visible << ','
          << r.in_gate << ',' << r.covered << ',' << r.se << ',' << r.estimate.x << ','
          << r.estimate.y << ',' << r.predicted.x << ',' << r.predicted.y << ','
          << r.estimate_error << ',' << r.prediction_error << ',' << r.angle_error << ','
          << r.beamwidth << ',' << r.detections << ',' << r.coasted << '\n';
    }
  }
}

void write_cdf_csv(std::ostream& out, const EnsembleSummary& s) {
  out << "se,cdf\n";
  out.precision(10);
  const std::size_t n = s.se_sorted.size();
  for (std::size_t i = 0; i < n; ++i) {
    // One row per distinct value: the CDF after its last occurrence.
    if (i + 1 < n && s.se_sorted[i + 1] == s.se_sorted[i]) continue;
    out << s.se_sorted[i] << ',' << static_cast<double>(i + 1) / n << '\n';
  }
}

void write_position_csv(std::ostream& out, const EnsembleSummary& s) {
  out << "bin_m,samples,coverage,mean_se\n";
  for (const auto& b : s.by_position) {
    out << b.bin << ',' << b.samples << ',' << b.coverage << ',' << b.mean_se << '\n';
  }
}

void write_summary_json(std::ostream& out, const Pipeline& pipeline,
                        const std::vector<EnsembleSummary>& summaries) {
  nlohmann::json j;
  j["seed"] = pipeline.config.system.seed;
  j["delta_T"] = pipeline.config.system.delta_T;
  j["N_a"] = pipeline.config.system.N_a;
  j["cfar"] = {{"p_fa", pipeline.cfar.p_fa},
               {"alpha", pipeline.cfar.alpha},
               {"window", pipeline.cfar.window},
               {"guard", pipeline.cfar.guard},
               {"k_fraction", pipeline.cfar.k_fraction}};
  nlohmann::json pols = nlohmann::json::array();
  for (const auto& s : summaries) {
    pols.push_back({{"policy", s.policy},
                    {"trials", s.trials},
                    {"epochs", s.epochs},
                    {"coverage_rate", s.coverage_rate},
                    {"zero_se_fraction", s.zero_se_fraction},
                    {"median_se_covered", s.median_se_covered},
                    {"se_p05", s.quantile(0.05)},
                    {"se_p50", s.quantile(0.50)},
                    {"se_p95", s.quantile(0.95)}});
  }
  j["policies"] = pols;
  out << j.dump(2) << '\n';
}

}  // namespace isac
