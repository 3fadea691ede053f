#include "isac/scene.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace isac {
namespace {

std::array<Vec2, 4> body_corners(double length, double width) {
  // Counter-clockwise: rear-right, front-right, front-left, rear-left.
  return {Vec2{-length / 2, -width / 2}, Vec2{length / 2, -width / 2},
          Vec2{length / 2, width / 2}, Vec2{-length / 2, width / 2}};
}

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * kPi);
}

struct Polyline {
  std::vector<Vec2> points;
  std::vector<double> cumulative;  // arc length at each vertex

  explicit Polyline(std::vector<Vec2> pts) : points(std::move(pts)) {
    cumulative.assign(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) {
      cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
    }
  }

  double length() const { return cumulative.back(); }

  Vec2 at(double s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t seg = std::min<std::size_t>(
        static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative.begin() - 1, 0)),
        points.size() - 2);
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0 ? (s - cumulative[seg]) / seg_len : 0.0;
    return points[seg] + (points[seg + 1] - points[seg]) * t;
  }

  /// Arc length of the closest point, searching segments from `first_seg` on.
  double project(Vec2 p, std::size_t& first_seg) const {
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = cumulative[first_seg];
    std::size_t best_seg = first_seg;
    const std::size_t last = std::min(points.size() - 1, first_seg + 2);
    for (std::size_t seg = first_seg; seg < last; ++seg) {
      const Vec2 a = points[seg];
      const Vec2 ab = points[seg + 1] - a;
      const double len2 = ab.dot(ab);
      const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      const double d = (p - (a + ab * t)).norm();
      if (d < best_d) {
        best_d = d;
        best_s = cumulative[seg] + t * std::sqrt(len2);
        best_seg = seg;
      }
    }
    first_seg = best_seg;
    return best_s;
  }
};

bool in_region(Vec2 p, const ScenarioDescriptor& sc) {
  const double r = p.norm();
  return p.y > 0 && r >= sc.r_min && r <= sc.r_max &&
         std::abs(bearing(p)) <= deg2rad(sc.fov_half_deg);
}

}  // namespace

std::vector<Scatterer> scatterer_layout(double length, double width, int count_per_side,
                                        double sigma_rcs_total) {
  if (count_per_side < 1) throw Error("scatterer layout: count_per_side must be >= 1");
  if (!(length > 0 && width > 0)) throw Error("scatterer layout: body extent must be > 0");
  const auto corners = body_corners(length, width);
  const int total = 4 * count_per_side;
  std::vector<Scatterer> out;
  out.reserve(total);
  for (int side = 0; side < 4; ++side) {
    const Vec2 a = corners[side];
    const Vec2 b = corners[(side + 1) % 4];
    for (int i = 0; i < count_per_side; ++i) {
      Scatterer s;
      s.body = a + (b - a) * (static_cast<double>(i) / count_per_side);
      s.rcs = sigma_rcs_total / total;
      s.sides = {side, i == 0 ? (side + 3) % 4 : -1};
      out.push_back(s);
    }
  }
  return out;
}

Vec2 to_world(const TargetState& state, Vec2 body) {
  return state.position + rotate(body, state.heading);
}

std::vector<Scatterer> visible_scatterers(const TargetState& state,
                                          const std::vector<Scatterer>& layout, Vec2 radar) {
  const auto corners = body_corners(state.length, state.width);
  std::array<bool, 4> facing{};
  for (int side = 0; side < 4; ++side) {
    const Vec2 a = corners[side];
    const Vec2 b = corners[(side + 1) % 4];
    const Vec2 edge = b - a;
    const Vec2 normal_body{edge.y, -edge.x};
    const Vec2 normal = rotate(normal_body, state.heading);
    const Vec2 mid = to_world(state, (a + b) * 0.5);
    facing[side] = normal.dot(radar - mid) > 0.0;
  }
  std::vector<Scatterer> out;
  for (const auto& s : layout) {
    const bool vis = std::any_of(s.sides.begin(), s.sides.end(),
                                 [&](int side) { return side >= 0 && facing[side]; });
    if (vis) out.push_back(s);
  }
  return out;
}

double radar_gain(double range, double rcs, const SystemConfig& cfg) {
  const double lambda = cfg.wavelength();
  const double four_pi = 4.0 * kPi;
  return lambda * lambda * rcs / (four_pi * four_pi * four_pi * std::pow(range, 4));
}

std::vector<ScatterPath> scatter_paths(const TargetState& state,
                                       const std::vector<Scatterer>& visible,
                                       const SystemConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::vector<ScatterPath> out;
  out.reserve(visible.size());
  for (const auto& s : visible) {
    ScatterPath p;
    p.world = to_world(state, s.body);
    p.range = p.world.norm();
    p.angle = bearing(p.world);
    p.delay = 2.0 * p.range / cfg.c;
    const double range_rate = p.world.dot(state.velocity) / p.range;
    p.doppler = 2.0 * (-range_rate) * cfg.f_c / cfg.c;
    p.gain = std::polar(std::sqrt(radar_gain(p.range, s.rcs, cfg)), phase(rng));
    out.push_back(p);
  }
  return out;
}

TargetState step_kinematics(const TargetState& state, double dt, Vec2 accel) {
  if (!(dt > 0)) throw Error("step_kinematics: dt must be > 0");
  TargetState next = state;
  next.position = state.position + state.velocity * dt + accel * (0.5 * dt * dt);
  next.velocity = state.velocity + accel * dt;
  next.acceleration = accel;
  if (next.velocity.norm() > 0) next.heading = std::atan2(next.velocity.y, next.velocity.x);
  return next;
}

const std::vector<std::string>& scenario_keys() {
  static const std::vector<std::string> keys{
      "scenario.waypoints",    "scenario.v_min",       "scenario.v_max",
      "scenario.v_init_min",   "scenario.v_init_max",  "scenario.a_max",
      "scenario.a_lat_max",    "scenario.lookahead",   "scenario.r_min",
      "scenario.r_max",        "scenario.fov_half_deg", "scenario.route_length",
      "scenario.segment_min",  "scenario.segment_max", "scenario.target_length",
      "scenario.target_width", "scenario.scatterers_per_side"};
  return keys;
}

ScenarioDescriptor scenario_from(const KeyValueFile& kv) {
  ScenarioDescriptor sc;
  if (auto pts = kv.get_points("scenario.waypoints")) {
    for (auto [x, y] : *pts) sc.waypoints.push_back({x, y});
  }
  auto set_d = [&](const char* key, double& dst) {
    if (auto v = kv.get_double(key)) dst = *v;
  };
  set_d("scenario.v_min", sc.v_min);
  set_d("scenario.v_max", sc.v_max);
  set_d("scenario.v_init_min", sc.v_init_min);
  set_d("scenario.v_init_max", sc.v_init_max);
  set_d("scenario.a_max", sc.a_max);
  set_d("scenario.a_lat_max", sc.a_lat_max);
  set_d("scenario.lookahead", sc.lookahead);
  set_d("scenario.r_min", sc.r_min);
  set_d("scenario.r_max", sc.r_max);
  set_d("scenario.fov_half_deg", sc.fov_half_deg);
  set_d("scenario.route_length", sc.route_length);
  set_d("scenario.segment_min", sc.segment_min);
  set_d("scenario.segment_max", sc.segment_max);
  set_d("scenario.target_length", sc.target_length);
  set_d("scenario.target_width", sc.target_width);
  if (auto v = kv.get_int("scenario.scatterers_per_side")) {
    sc.scatterers_per_side = static_cast<int>(*v);
  }
  return sc;
}

std::vector<Vec2> random_urban_route(const ScenarioDescriptor& sc, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> seg_len(sc.segment_min, sc.segment_max);
  const Vec2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

  auto segment_fits = [&](Vec2 a, Vec2 b) {
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int k = 0; k <= steps; ++k) {
      if (!in_region(a + (b - a) * (static_cast<double>(k) / steps), sc)) return false;
    }
    return true;
  };

  const double margin = 0.1 * (sc.r_max - sc.r_min);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double r = sc.r_min + margin + unit(rng) * (sc.r_max - sc.r_min - 2 * margin);
    const double half = deg2rad(sc.fov_half_deg) * 0.8;
    const double ang = -half + 2 * half * unit(rng);
    std::vector<Vec2> route{Vec2{r * std::sin(ang), r * std::cos(ang)}};
    int dir = static_cast<int>(unit(rng) * 4) % 4;
    double total = 0.0;
    bool stuck = false;
    while (total < sc.route_length && !stuck) {
      stuck = true;
      for (int tries = 0; tries < 12; ++tries) {
        const double want = std::min(seg_len(rng), sc.route_length - total);
        const Vec2 next = route.back() + dirs[dir] * want;
        if (segment_fits(route.back(), next)) {
          route.push_back(next);
          total += want;
          stuck = false;
          break;
        }
        if (tries % 2 == 1) dir = (dir + 2) % 4;  // try the opposite turn
      }
      dir = (dir + (unit(rng) < 0.5 ? 1 : 3)) % 4;
    }
    if (!stuck && route.size() >= 2) return route;
  }
  throw Error("random_urban_route: no route fits the scenario region");
}

Trajectory generate_trajectory(const SystemConfig& cfg, const ScenarioDescriptor& sc, Rng& rng) {
  if (!(sc.v_min >= 0 && sc.v_min <= sc.v_init_min && sc.v_init_min <= sc.v_init_max &&
        sc.v_init_max <= sc.v_max)) {
    throw Error("trajectory: infeasible speeds (need 0 <= v_min <= v_init_min <= v_init_max <= v_max)");
  }
  if (sc.v_max <= 0) throw Error("trajectory: v_max must be > 0");
  if (sc.a_max < 0 || sc.a_lat_max <= 0) throw Error("trajectory: acceleration limits must be positive");

  Trajectory traj;
  traj.delta_t = cfg.delta_T;
  traj.seed = cfg.seed;
  traj.waypoints = sc.waypoints.empty() ? random_urban_route(sc, rng) : sc.waypoints;
  if (traj.waypoints.size() < 2) throw Error("trajectory: need at least two waypoints");
  for (const auto& w : traj.waypoints) {
    if (!(w.y > 0) || std::abs(bearing(w)) > deg2rad(sc.fov_half_deg)) {
      throw Error("trajectory: waypoint outside the base station field of view");
    }
  }
  const Polyline path(traj.waypoints);
  if (!(path.length() > 0)) throw Error("trajectory: route has zero length");

  std::uniform_real_distribution<double> v0(sc.v_init_min, sc.v_init_max);
  std::uniform_real_distribution<double> accel(-sc.a_max, sc.a_max);
  const double dt = cfg.delta_T;

  TargetState state;
  state.length = sc.target_length;
  state.width = sc.target_width;
  state.position = traj.waypoints[0];
  const Vec2 first = traj.waypoints[1] - traj.waypoints[0];
  state.heading = std::atan2(first.y, first.x);
  const double speed0 = sc.v_init_min == sc.v_init_max ? sc.v_init_min : v0(rng);
  state.velocity = Vec2{std::cos(state.heading), std::sin(state.heading)} * speed0;

  std::size_t seg = 0;
  double travelled = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double s_here = path.project(state.position, seg);
    const double speed = state.velocity.norm();
    const bool last = epoch + 1 == cfg.epochs || s_here + 0.5 * speed * dt >= path.length();
    if (last) {
      state.acceleration = {};
      traj.states.push_back(state);
      traj.arc_length.push_back(travelled);
      break;
    }
    const double a_long = sc.a_max > 0 ? accel(rng) : 0.0;
    const double speed_next = std::clamp(speed + a_long * dt, sc.v_min, sc.v_max);

    const Vec2 aim = path.at(s_here + sc.lookahead) - state.position;
    double heading_next = state.heading;
    if (aim.norm() > 1e-9) {
      const double want = std::atan2(aim.y, aim.x);
      const double max_turn = sc.a_lat_max / std::max(speed, 1e-3) * dt;
      heading_next = state.heading + std::clamp(wrap_angle(want - state.heading), -max_turn, max_turn);
    }
    const Vec2 v_next = Vec2{std::cos(heading_next), std::sin(heading_next)} * speed_next;
    const Vec2 a = (v_next - state.velocity) * (1.0 / dt);
    state.acceleration = a;
    traj.states.push_back(state);
    traj.arc_length.push_back(travelled);
    const TargetState next = step_kinematics(state, dt, a);
    travelled += (next.position - state.position).norm();
    state = next;
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "epoch,x,y,v,heading\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const auto& s = traj.states[t];
    out << t << ',' << s.position.x << ',' << s.position.y << ',' << s.velocity.norm() << ','
        << s.heading << '\n';
  }
}

}  // namespace isac
