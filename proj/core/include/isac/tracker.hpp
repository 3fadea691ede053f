#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "isac/array.hpp"
#include "isac/config.hpp"
#include "isac/detector.hpp"
#include "isac/scene.hpp"

namespace isac {

struct TrackerSettings {
  double margin_deg = 3.0;            // added to the target's angular extent
  double target_extent = 4.5;         // m
  double warmup_sigma = 0.5;          // m, stand-in estimates before tracking starts
  std::optional<double> fixed_width;  // degrees; unset selects adaptively
};

const std::vector<std::string>& tracker_keys();
TrackerSettings tracker_settings_from(const KeyValueFile& kv);

/// Where the receive codebook goes for the next epoch.
struct CodebookPlacement {
  double center_sin = 0.0;
  int size = 0;       // D
  int first_bin = 0;

  DftCodebook build(int n_a) const { return codebook_from_bins(n_a, first_bin, size); }
};

struct Prediction {
  Vec2 position;
  double angle = 0.0;     // rad
  double distance = 0.0;  // m
};

struct TrackState {
  std::deque<Vec2> history;  // newest last, at most three
  std::optional<Prediction> prediction;
  double beamwidth_deg = 0.0;
  std::optional<CodebookPlacement> placement;
  int warmup_epochs = 0;
  int coasted_epochs = 0;

  bool ready() const { return prediction.has_value(); }
};

/// Likelihood-weighted center of mass of the detections, each mapped to
/// Cartesian through d = c tau / 2, (x, y) = d (sin phi, cos phi).
/// Throws on an empty list.
Vec2 fuse_center(const std::vector<Detection>& detections, double c);

/// Three-point constant-acceleration extrapolation x = 3 x_t - 3 x_{t-1} + x_{t-2},
/// with angle atan(x / y). Throws on fewer than three estimates or at the origin.
Prediction predict(const std::deque<Vec2>& history);

/// Smallest width in fov_set covering the target's angular extent plus the
/// margin; the widest one when none suffices.
double select_beamwidth(double distance, double target_extent, const std::vector<double>& fov_set,
                        double margin_deg);

/// D contiguous DFT beams covering the transmit main lobe plus one guard
/// beam each side, rounded up to even and kept above N_rf. Codebooks that
/// would leave beam-space are slid back inside it.
CodebookPlacement place_rx_codebook(double angle, double width_deg, const SystemConfig& cfg);

/// Pushes a stand-in estimate during warm-up.
void warmup_epoch(TrackState& state, Vec2 estimate, const SystemConfig& cfg,
                  const TrackerSettings& settings);

/// Fuses the detections (or coasts on the previous prediction when there
/// are none), then refreshes the prediction, beamwidth and codebook placement.
void track_epoch(TrackState& state, const std::vector<Detection>& detections,
                 const SystemConfig& cfg, const TrackerSettings& settings);

}  // namespace isac
