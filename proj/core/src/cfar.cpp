#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "json.hpp"

#include "isac/detector.hpp"

namespace isac {

void CfarConfig::validate() const {
  for (int axis = 0; axis < 3; ++axis) {
    if (guard[axis] < 0) throw Error("cfar: guard half-sizes must be >= 0");
    if (!(window[axis] > guard[axis])) {
      throw Error("cfar: window must strictly contain the guard region on every axis");
    }
  }
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw Error("cfar: k_fraction must lie in (0, 1]");
  if (!(alpha > 0.0)) throw Error("cfar: alpha must be > 0");
}

int CfarConfig::reference_cells() const {
  int full = 1;
  int inner = 1;
  for (int axis = 0; axis < 3; ++axis) {
    full *= 2 * window[axis] + 1;
    inner *= 2 * guard[axis] + 1;
  }
  return full - inner;
}

int CfarConfig::order_index(int reference) const {
  const int k = static_cast<int>(std::ceil(k_fraction * reference - 1e-12));
  return std::clamp(k, 1, reference);
}

double CfarConfig::alpha_for(int reference) const {
  const auto it = edge_alpha.find(reference);
  return it == edge_alpha.end() ? alpha : it->second;
}

std::vector<int> CfarConfig::reachable_reference_counts() const {
  // Per axis, a cell near an edge loses `clip` window cells on one side
  // (never both: the grid holds at least one full window).
  std::array<std::vector<std::pair<int, int>>, 3> extents;  // (window, guard) lengths
  for (int axis = 0; axis < 3; ++axis) {
    const int w = window[axis];
    const int g = guard[axis];
    for (int clip = 0; clip <= w; ++clip) {
      extents[axis].emplace_back(2 * w + 1 - clip, 2 * g + 1 - std::max(0, clip - (w - g)));
    }
  }
  std::vector<int> counts;
  for (const auto& [w0, g0] : extents[0]) {
    for (const auto& [w1, g1] : extents[1]) {
      for (const auto& [w2, g2] : extents[2]) counts.push_back(w0 * w1 * w2 - g0 * g1 * g2);
    }
  }
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
  counts.erase(std::remove(counts.begin(), counts.end(), 0), counts.end());
  return counts;
}

const std::vector<std::string>& cfar_keys() {
  static const std::vector<std::string> keys{"cfar.window", "cfar.guard", "cfar.k_fraction",
                                             "cfar.alpha", "cfar.calibration_windows"};
  return keys;
}

CfarConfig cfar_geometry_from(const KeyValueFile& kv) {
  CfarConfig cfar;
  auto triple = [&](const char* key, std::array<int, 3>& dst) {
    if (auto v = kv.get_doubles(key)) {
      if (v->size() != 3) throw Error(std::string("config: ") + key + " expects three integers");
      for (int i = 0; i < 3; ++i) dst[i] = static_cast<int>((*v)[i]);
    }
  };
  triple("cfar.window", cfar.window);
  triple("cfar.guard", cfar.guard);
  if (auto v = kv.get_double("cfar.k_fraction")) cfar.k_fraction = *v;
  if (auto v = kv.get_double("cfar.alpha")) cfar.alpha = *v;
  return cfar;
}

namespace {

void check_window_fits(const DetectionGrid& grid, const CfarConfig& cfar) {
  cfar.validate();
  const int dims[3] = {grid.n_doppler(), grid.n_delay(), grid.n_angle()};
  for (int axis = 0; axis < 3; ++axis) {
    if (2 * cfar.window[axis] + 1 > dims[axis]) {
      throw Error("cfar: window larger than grid along axis " + std::to_string(axis));
    }
  }
}

// Reference values of cell (in, it, ip): window minus guard, clipped at the edges.
void gather_reference(const DetectionGrid& grid, const CfarConfig& cfar, int in, int it, int ip,
                      std::vector<double>& ref) {
  ref.clear();
  const int nn = grid.n_doppler();
  const int nt = grid.n_delay();
  const int np = grid.n_angle();
  const int n_lo = std::max(0, in - cfar.window[0]), n_hi = std::min(nn - 1, in + cfar.window[0]);
  const int t_lo = std::max(0, it - cfar.window[1]), t_hi = std::min(nt - 1, it + cfar.window[1]);
  const int p_lo = std::max(0, ip - cfar.window[2]), p_hi = std::min(np - 1, ip + cfar.window[2]);
  for (int p = p_lo; p <= p_hi; ++p) {
    const bool gp = std::abs(p - ip) <= cfar.guard[2];
    for (int t = t_lo; t <= t_hi; ++t) {
      const bool gt = gp && std::abs(t - it) <= cfar.guard[1];
      const double* row = grid.stat.data() + grid.index(0, t, p);
      for (int n = n_lo; n <= n_hi; ++n) {
        if (gt && std::abs(n - in) <= cfar.guard[0]) continue;
        ref.push_back(row[n]);
      }
    }
  }
}

double threshold_of(const CfarConfig& cfar, std::vector<double>& ref) {
  const int size = static_cast<int>(ref.size());
  const int k = cfar.order_index(size);
  std::nth_element(ref.begin(), ref.begin() + (k - 1), ref.end());
  return cfar.alpha_for(size) * ref[k - 1];
}

}  // namespace

std::vector<double> os_cfar_thresholds(const DetectionGrid& grid, const CfarConfig& cfar) {
  check_window_fits(grid, cfar);
  std::vector<double> thresholds(grid.cells(), std::numeric_limits<double>::infinity());
  std::vector<double> ref;
  ref.reserve(cfar.reference_cells());
  for (int ip = 0; ip < grid.n_angle(); ++ip) {
    for (int it = 0; it < grid.n_delay(); ++it) {
      for (int in = 0; in < grid.n_doppler(); ++in) {
        gather_reference(grid, cfar, in, it, ip, ref);
        if (!ref.empty()) thresholds[grid.index(in, it, ip)] = threshold_of(cfar, ref);
      }
    }
  }
  return thresholds;
}

std::vector<Detection> os_cfar(const DetectionGrid& grid, const CfarConfig& cfar) {
  check_window_fits(grid, cfar);
  std::vector<Detection> out;
  std::vector<double> ref;
  ref.reserve(cfar.reference_cells());
  for (int ip = 0; ip < grid.n_angle(); ++ip) {
    for (int it = 0; it < grid.n_delay(); ++it) {
      for (int in = 0; in < grid.n_doppler(); ++in) {
        const std::size_t idx = grid.index(in, it, ip);
        gather_reference(grid, cfar, in, it, ip, ref);
        if (ref.empty()) continue;
        // l > alpha X_(k)  iff  at least k reference values lie below l / alpha.
        const int size = static_cast<int>(ref.size());
        const int k = cfar.order_index(size);
        const double level = grid.stat[idx] / cfar.alpha_for(size);
        int below = 0;
        for (double v : ref) below += v < level;
        if (below < k) continue;
        const double threshold = threshold_of(cfar, ref);
        if (!(grid.stat[idx] > threshold)) continue;
        Detection d;
        d.i_doppler = in;
        d.i_delay = it;
        d.i_angle = ip;
        d.doppler = grid.doppler[in];
        d.delay = grid.delay_offset + grid.delay[it];
        d.angle = grid.angle(ip);
        d.stat = grid.stat[idx];
        d.threshold = threshold;
        d.amplitude = grid.amplitude[idx];
        out.push_back(d);
      }
    }
  }
  return out;
}

namespace {

double calibrate_alpha(double p_fa, int reference, int k, Rng& rng, int windows) {
  // The k-th smallest of R unit exponentials is -log(1 - U) with U the k-th
  // smallest of R uniforms, U ~ Beta(k, R + 1 - k) = G_k / (G_k + G_{R+1-k}).
  std::gamma_distribution<double> ga(k, 1.0);
  std::gamma_distribution<double> gb(reference + 1 - k, 1.0);
  std::vector<double> order_stat(windows);
  for (int w = 0; w < windows; ++w) {
    const double a = ga(rng);
    const double b = gb(rng);
    order_stat[w] = std::log1p(a / b);  // -log(1 - a / (a + b))
  }
  auto rate = [&](double alpha) {
    double sum = 0.0;
    for (double x : order_stat) sum += std::exp(-alpha * x);
    return sum / windows;
  };

  double lo = 0.0;
  double hi = 1.0;
  while (rate(hi) > p_fa) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw Error("calibrate_cfar: P_fa unreachable for this window (alpha diverges)");
  }
  // Newton on log(rate) - log(p_fa), falling back to bisection outside the bracket.
  double alpha = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0.0;
    double slope = 0.0;
    for (double x : order_stat) {
      const double e = std::exp(-alpha * x);
      sum += e;
      slope += x * e;
    }
    const double f = std::log(sum / windows) - std::log(p_fa);
    (f > 0 ? lo : hi) = alpha;
    double next = alpha + f * sum / slope;  // d log(rate) / d alpha = -slope / sum
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool converged = std::abs(next - alpha) <= 1e-12 * alpha;
    alpha = next;
    if (converged || hi - lo <= 1e-13 * hi) break;
  }
  return alpha;
}

}  // namespace

CfarConfig calibrate_cfar(double p_fa, const CfarConfig& geometry, Rng& rng, int windows) {
  if (!(p_fa > 0.0 && p_fa < 1.0)) throw Error("calibrate_cfar: P_fa must lie in (0, 1)");
  if (windows < 1) throw Error("calibrate_cfar: need at least one window");
  CfarConfig cfar = geometry;
  cfar.alpha = 1.0;
  cfar.validate();
  cfar.p_fa = p_fa;
  cfar.edge_alpha.clear();
  const int full = cfar.reference_cells();
  cfar.alpha = calibrate_alpha(p_fa, full, cfar.order_index(full), rng, windows);
  for (int reference : cfar.reachable_reference_counts()) {
    if (reference == full) continue;
    cfar.edge_alpha[reference] =
        calibrate_alpha(p_fa, reference, cfar.order_index(reference), rng, windows);
  }
  return cfar;
}

void write_detections_csv(std::ostream& out, const std::vector<Detection>& dets) {
  out << "i_doppler,i_delay,i_angle,doppler_hz,delay_s,angle_rad,stat,threshold,h_re,h_im\n";
  out.precision(12);
  for (const auto& d : dets) {
    out << d.i_doppler << ',' << d.i_delay << ',' << d.i_angle << ',' << d.doppler << ','
        << d.delay << ',' << d.angle << ',' << d.stat << ',' << d.threshold << ','
        << d.amplitude.real() << ',' << d.amplitude.imag() << '\n';
  }
}

void write_detections_json(std::ostream& out, const std::vector<Detection>& dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : dets) {
    arr.push_back({{"i_doppler", d.i_doppler},
                   {"i_delay", d.i_delay},
                   {"i_angle", d.i_angle},
                   {"doppler_hz", d.doppler},
                   {"delay_s", d.delay},
                   {"angle_rad", d.angle},
                   {"stat", d.stat},
                   {"threshold", d.threshold},
                   {"h_re", d.amplitude.real()},
                   {"h_im", d.amplitude.imag()}});
  }
  out << arr.dump(2) << '\n';
}

void write_grid_csv(std::ostream& out, const DetectionGrid& grid) {
  out << "i_doppler,i_delay,i_angle,doppler_hz,delay_s,angle_rad,stat\n";
  out.precision(12);
  for (int ip = 0; ip < grid.n_angle(); ++ip) {
    for (int it = 0; it < grid.n_delay(); ++it) {
      for (int in = 0; in < grid.n_doppler(); ++in) {
        out << in << ',' << it << ',' << ip << ',' << grid.doppler[in] << ','
            << grid.delay_offset + grid.delay[it] << ',' << grid.angle(ip) << ','
            << grid.stat[grid.index(in, it, ip)] << '\n';
      }
    }
  }
}

}  // namespace isac
