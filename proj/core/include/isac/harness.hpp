#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isac/array.hpp"
#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/detector.hpp"
#include "isac/scene.hpp"
#include "isac/tracker.hpp"

namespace isac {

/// Everything a run needs, read from one config file.
struct RunConfig {
  SystemConfig system;
  GridSpec grid;
  CfarConfig cfar;               // geometry; alpha is calibrated unless cfar_alpha is set
  std::optional<double> cfar_alpha;
  int calibration_windows = 200000;
  TrackerSettings tracker;
  ScenarioDescriptor scenario;
  int warmup_epochs = 3;
  int threads = 0;               // 0: hardware concurrency
};

RunConfig run_config_from(const KeyValueFile& kv);
RunConfig load_run_config(const std::filesystem::path& path);

/// Transmit-beam policy: fixed width or adaptive selection from fov_set.
struct Policy {
  std::optional<double> fixed_width;  // degrees

  static Policy adaptive() { return {}; }
  static Policy fixed(double width_deg) { return {width_deg}; }
  /// "adaptive" or "fixed:<deg>".
  static Policy parse(const std::string& text);
  /// "adaptive" or "fixed_<deg>", used in file names.
  std::string label() const;
};

struct EpochRecord {
  int trial = 0;
  int epoch = 0;
  bool warmup = false;
  double arc_length = 0.0;   // m along the trajectory
  Vec2 truth;                // body center
  int visible = 0;           // visible scatterers
  int in_gate = 0;           // of which inside the receive window
  bool covered = false;      // every visible scatterer inside the main lobe
  double se = 0.0;           // bits/s/Hz
  Vec2 estimate;             // fused estimate of this epoch
  Vec2 predicted;            // prediction the beam was pointed at
  double estimate_error = 0.0;    // m, |estimate - truth|
  double prediction_error = 0.0;  // m, |predicted - truth|
  double angle_error = 0.0;       // rad, pointing angle - truth bearing
  double beamwidth = 0.0;         // degrees
  int detections = 0;
  bool coasted = false;
};

/// log2(1 + P_tx |a^H(phi0) f|^2 / (N_0 W) (lambda / (4 pi d0))^2) when
/// covered, 0 otherwise.
double spectral_efficiency(double phi0, double d0, const TxBeam& beam, bool covered,
                           const SystemConfig& cfg);

/// True iff every path's angle lies in the beam's main lobe.
bool coverage_flag(const std::vector<ScatterPath>& visible, const TxBeam& beam);

/// Calibrated, read-only state shared by all trials of a run.
struct Pipeline {
  RunConfig config;
  CfarConfig cfar;  // with calibrated alpha
};

/// Calibrates CFAR (or takes cfar_alpha) and validates the configuration.
Pipeline prepare_pipeline(const RunConfig& config);

/// One trajectory end to end. Trial streams derive from (seed, trial), so the
/// result depends only on the pipeline, the policy and the trial index.
std::vector<EpochRecord> run_trial(const Pipeline& pipeline, const Policy& policy,
                                   std::uint64_t trial);
std::vector<EpochRecord> run_trial(const Pipeline& pipeline, const Trajectory& trajectory,
                                   const Policy& policy, std::uint64_t trial);

/// Generates the trajectory of a trial exactly as run_trial does.
Trajectory trial_trajectory(const Pipeline& pipeline, std::uint64_t trial);

struct PositionBin {
  int bin = 0;        // floor(arc length / 1 m)
  int samples = 0;
  double coverage = 0.0;
  double mean_se = 0.0;
};

struct EnsembleSummary {
  std::string policy;
  double delta_T = 0.0;
  int trials = 0;
  int epochs = 0;                  // post-warm-up epochs pooled
  double coverage_rate = 0.0;      // fraction of pooled epochs fully covered
  double zero_se_fraction = 0.0;
  double median_se_covered = 0.0;
  std::vector<double> se_sorted;   // pooled SE samples, ascending
  std::vector<PositionBin> by_position;
  std::vector<EpochRecord> records;

  /// Empirical CDF value P(SE <= x).
  double cdf(double x) const;
  /// Type-7 (linear interpolation) sample quantile of SE.
  double quantile(double q) const;
};

/// Aggregates one policy's trials. Post-warm-up records only.
EnsembleSummary summarize(const std::string& policy, double delta_T,
                          std::vector<std::vector<EpochRecord>> trials);

/// Runs trials 0..n_trials-1 for each policy, concurrently across trials.
/// Aggregation follows trial order, so results do not depend on scheduling.
std::vector<EnsembleSummary> run_ensemble(const Pipeline& pipeline, int n_trials,
                                          const std::vector<Policy>& policies);

/// Invariant violations in a summary (SE gating, CDF monotonicity); empty when clean.
std::vector<std::string> check_invariants(const EnsembleSummary& summary);

void write_epochs_csv(std::ostream& out, const std::vector<EnsembleSummary>& summaries);
void write_cdf_csv(std::ostream& out, const EnsembleSummary& summary);
void write_position_csv(std::ostream& out, const EnsembleSummary& summary);
void write_summary_json(std::ostream& out, const Pipeline& pipeline,
                        const std::vector<EnsembleSummary>& summaries);

}  // namespace isac
