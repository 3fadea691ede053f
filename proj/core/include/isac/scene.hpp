#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "isac/config.hpp"
#include "isac/random.hpp"
#include "isac/types.hpp"

namespace isac {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

/// Angle from boresight (+y) of a point seen from the origin.
inline double bearing(Vec2 p) { return std::atan2(p.x, p.y); }

struct TargetState {
  Vec2 position;       // body center, m
  Vec2 velocity;       // m/s
  Vec2 acceleration;   // m/s^2, held constant until the next state
  double heading = 0;  // rad, direction of the body's long axis (atan2(v_y, v_x) convention)
  double length = 4.5; // m
  double width = 1.8;  // m
};

/// Point scatterer in the body frame (x forward along the heading, y to the left).
struct Scatterer {
  Vec2 body;
  double rcs = 0.0;                  // m^2
  std::array<int, 2> sides{-1, -1};  // rectangle sides this point lies on (-1 = none)
};

/// Per-epoch channel parameters of one scatterer.
struct ScatterPath {
  Vec2 world;
  double range = 0.0;      // m
  double angle = 0.0;      // rad
  double delay = 0.0;      // s, two-way
  double doppler = 0.0;    // Hz, positive when approaching
  Complex gain{0.0, 0.0};  // h_p
};

/// count_per_side points per side of an L x W_b rectangle, starting at each
/// side's first corner; total RCS split equally.
std::vector<Scatterer> scatterer_layout(double length, double width, int count_per_side,
                                        double sigma_rcs_total);

/// Scatterers lying on a side whose outward normal faces the radar.
std::vector<Scatterer> visible_scatterers(const TargetState& state,
                                          const std::vector<Scatterer>& layout,
                                          Vec2 radar = {});

Vec2 to_world(const TargetState& state, Vec2 body);

/// Radar-equation magnitude, two-way delay, Doppler and angle of each
/// scatterer; the phase of h_p is uniform on [0, 2pi).
std::vector<ScatterPath> scatter_paths(const TargetState& state,
                                       const std::vector<Scatterer>& visible,
                                       const SystemConfig& cfg, Rng& rng);

/// Radar-equation power |h|^2 = lambda^2 sigma / ((4 pi)^3 d^4).
double radar_gain(double range, double rcs, const SystemConfig& cfg);

/// x += v dt + a dt^2 / 2, v += a dt; heading follows the new velocity.
TargetState step_kinematics(const TargetState& state, double dt, Vec2 accel);

struct ScenarioDescriptor {
  std::vector<Vec2> waypoints;  // empty: draw a random urban route
  double v_min = 2.0;           // m/s
  double v_max = 15.0;
  double v_init_min = 6.0;
  double v_init_max = 12.0;
  double a_max = 3.0;           // along-track, m/s^2
  double a_lat_max = 6.0;       // lateral limit while turning, m/s^2
  double lookahead = 4.0;       // m
  // Region used for random routes and for feasibility checks.
  double r_min = 20.0;
  double r_max = 120.0;
  double fov_half_deg = 60.0;
  double route_length = 150.0;  // m, random routes only
  double segment_min = 25.0;
  double segment_max = 60.0;
  // Target body.
  double target_length = 4.5;
  double target_width = 1.8;
  int scatterers_per_side = 3;
};

const std::vector<std::string>& scenario_keys();
ScenarioDescriptor scenario_from(const KeyValueFile& kv);

struct Trajectory {
  std::vector<TargetState> states;  // spaced delta_t apart
  std::vector<double> arc_length;   // distance travelled at each state, m
  std::vector<Vec2> waypoints;
  double delta_t = 0.0;
  std::uint64_t seed = 0;
};

/// Random axis-aligned route with right-angle turns inside the scenario region.
std::vector<Vec2> random_urban_route(const ScenarioDescriptor& scenario, Rng& rng);

/// Follows the waypoint polyline with a pursuit law. Along-track acceleration
/// is uniform in [-a_max, a_max], redrawn every epoch and clipped so the
/// speed stays in [v_min, v_max]; the 2-D acceleration is constant across
/// each interval, so consecutive states obey the constant-acceleration
/// kinematics exactly. Stops at the end of the route or after cfg.epochs.
Trajectory generate_trajectory(const SystemConfig& cfg, const ScenarioDescriptor& scenario,
                               Rng& rng);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace isac
