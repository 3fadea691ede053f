#include "isac/tracker.hpp"

#include <algorithm>
#include <cmath>

namespace isac {

const std::vector<std::string>& tracker_keys() {
  static const std::vector<std::string> keys{"tracker.margin_deg", "tracker.target_extent",
                                             "tracker.warmup_sigma"};
  return keys;
}

TrackerSettings tracker_settings_from(const KeyValueFile& kv) {
  TrackerSettings s;
  if (auto v = kv.get_double("tracker.margin_deg")) s.margin_deg = *v;
  if (auto v = kv.get_double("tracker.target_extent")) s.target_extent = *v;
  if (auto v = kv.get_double("tracker.warmup_sigma")) s.warmup_sigma = *v;
  return s;
}

Vec2 fuse_center(const std::vector<Detection>& detections, double c) {
  if (detections.empty()) throw Error("fuse_center: no detections");
  double total = 0.0;
  for (const auto& d : detections) total += d.stat;
  Vec2 center{};
  for (const auto& d : detections) {
    const double w = total > 0 ? d.stat / total : 1.0 / detections.size();
    const double range = 0.5 * c * d.delay;
    center = center + Vec2{range * std::sin(d.angle), range * std::cos(d.angle)} * w;
  }
  return center;
}

Prediction predict(const std::deque<Vec2>& history) {
  if (history.size() != 3) throw Error("predict: need exactly three past estimates");
  const Vec2& x2 = history[0];  // t-2
  const Vec2& x1 = history[1];  // t-1
  const Vec2& x0 = history[2];  // t
  Prediction p;
  p.position = x0 * 3.0 - x1 * 3.0 + x2;
  if (p.position.x == 0.0 && p.position.y == 0.0) {
    throw Error("predict: predicted position at the array, angle undefined");
  }
  p.angle = p.position.y != 0.0 ? std::atan(p.position.x / p.position.y)
                                : std::copysign(kPi / 2, p.position.x);
  p.distance = p.position.norm();
  return p;
}

double select_beamwidth(double distance, double target_extent, const std::vector<double>& fov_set,
                        double margin_deg) {
  if (fov_set.empty()) throw Error("select_beamwidth: empty beamwidth set");
  const double required = rad2deg(2.0 * std::atan(0.5 * target_extent / distance)) + margin_deg;
  for (double w : fov_set) {
    if (w >= required) return w;
  }
  return fov_set.back();
}

CodebookPlacement place_rx_codebook(double angle, double width_deg, const SystemConfig& cfg) {
  const double half = deg2rad(width_deg) / 2.0;
  const double span = std::sin(angle + half) - std::sin(angle - half);
  int d = static_cast<int>(std::ceil(span / dft_beamwidth(cfg.N_a) - 1e-9)) + 2;
  d = std::max(d, std::max(cfg.D, cfg.N_rf + 1));
  if (d % 2) ++d;
  d = std::min(d, cfg.N_a);

  CodebookPlacement placement;
  placement.center_sin = std::sin(angle);
  placement.size = d;
  const int first = nearest_dft_bin(placement.center_sin, cfg.N_a) - d / 2;
  placement.first_bin = std::clamp(first, -cfg.N_a / 2, cfg.N_a / 2 - d);
  return placement;
}

namespace {

void refresh(TrackState& state, const SystemConfig& cfg, const TrackerSettings& settings) {
  if (state.history.size() < 3) return;
  state.prediction = predict(state.history);
  state.beamwidth_deg = settings.fixed_width
                            ? *settings.fixed_width
                            : select_beamwidth(state.prediction->distance, settings.target_extent,
                                               cfg.fov_set, settings.margin_deg);
  state.placement = place_rx_codebook(state.prediction->angle, state.beamwidth_deg, cfg);
}

void push(TrackState& state, Vec2 estimate) {
  state.history.push_back(estimate);
  while (state.history.size() > 3) state.history.pop_front();
}

}  // namespace

void warmup_epoch(TrackState& state, Vec2 estimate, const SystemConfig& cfg,
                  const TrackerSettings& settings) {
  push(state, estimate);
  ++state.warmup_epochs;
  refresh(state, cfg, settings);
}

void track_epoch(TrackState& state, const std::vector<Detection>& detections,
                 const SystemConfig& cfg, const TrackerSettings& settings) {
  Vec2 estimate;
  if (!detections.empty()) {
    estimate = fuse_center(detections, cfg.c);
  } else if (state.prediction) {
    estimate = state.prediction->position;
    ++state.coasted_epochs;
  } else if (!state.history.empty()) {
    estimate = state.history.back();
    ++state.coasted_epochs;
  } else {
    return;
  }
  push(state, estimate);
  refresh(state, cfg, settings);
}

}  // namespace isac
